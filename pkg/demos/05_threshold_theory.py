"""Collision probabilities and the threshold they suggest."""

from mbtree.theory import binomial_pmf, collision_prob, monte_carlo_collisions, per_position_collision, suggest_threshold

print(" n   C(10,n) p^n   (p = 3e-3)")
for n in range(11):
    print(f"{n:2d}   {collision_prob(10, n, 3e-3):.1e}")

for n_apps in (1, 10, 100, 10_000):
    s = suggest_threshold(10, n_apps)
    extra = f"  (customary choice n={s.reference_n}, theta={s.reference_theta:.0f})" if s.reference_n is not None else ""
    print(f"N_A={n_apps:>6}: n={s.n}, theta={s.theta:.0f}{extra}")

p = per_position_collision("uniform")
emp = monte_carlo_collisions(2_000_000, distribution="uniform", seed=5, jobs=2)
exact = binomial_pmf(10, p)
print(f"\nuniform sizes in [-1500, 1500]: per-position collision {p:.2e}")
for n in range(3):
    print(f"  P(n={n}) Monte Carlo {emp[n]:.3e}  exact {exact[n]:.3e}")
