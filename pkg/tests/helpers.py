import socket

import dpkt

from mbtree.capture import Protocol, RawPacket, TcpFlags

CLIENT, SERVER = "192.168.1.2", "203.0.113.9"


def tcp(ts, src, dst, sport, dport, flags, seq=0, ack=0, payload=b""):
    return RawPacket(ts, src, dst, Protocol.TCP, payload, sport, dport, TcpFlags(flags), seq, ack, ip_proto=6)


def udp(ts, src, dst, sport, dport, payload=b""):
    return RawPacket(ts, src, dst, Protocol.UDP, payload, sport, dport, ip_proto=17)


def handshake(ts=0.0, client=CLIENT, server=SERVER, cport=40000, sport=443, isn_c=1000, isn_s=5000):
    """SYN / SYN-ACK / ACK; returns packets and the next sequence numbers."""
    S, A = TcpFlags.SYN, TcpFlags.ACK
    pkts = [
        tcp(ts, client, server, cport, sport, S, isn_c),
        tcp(ts + 0.001, server, client, sport, cport, S | A, isn_s, isn_c + 1),
        tcp(ts + 0.002, client, server, cport, sport, A, isn_c + 1, isn_s + 1),
    ]
    return pkts, isn_c + 1, isn_s + 1


def dpkt_frame(src, dst, transport, proto, ip_id=1, mf=False, offset=0):
    ip = dpkt.ip.IP(
        src=socket.inet_aton(src), dst=socket.inet_aton(dst), p=proto, id=ip_id, ttl=64,
        data=transport,
    )
    ip.mf = int(mf)
    ip.offset = offset // 8  # dpkt stores 8-byte units here
    ip.len = 20 + len(bytes(transport))
    eth = dpkt.ethernet.Ethernet(src=b"\x02" * 6, dst=b"\x04" * 6, type=dpkt.ethernet.ETH_TYPE_IP, data=ip)
    return bytes(eth)


def write_dpkt(path, frames, linktype=dpkt.pcap.DLT_EN10MB, nano=False):
    with open(path, "wb") as fh:
        w = dpkt.pcap.Writer(fh, linktype=linktype, nano=nano)
        for ts, frame in frames:
            w.writepkt(frame, ts=ts)
    return path

