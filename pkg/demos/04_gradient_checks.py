# Every learnable module here backpropagates by hand, so each one ships
# with a finite-difference check. This runs the full suite and shows the
# worst relative error per module; anything near 1e-5 or above would mean
# a wrong derivative somewhere.
#
#   python demos/04_gradient_checks.py

from tgmc.verify import DEFAULT_TOLERANCE, run_all

results = run_all(seed=0)

print(f"{'check':<28} {'params':>7} {'max rel err':>12} {'secs':>6}")
for res in results:
    flag = "ok" if res.passed() else "FAIL"
    print(f"{res.name:<28} {res.n_params:>7} {res.max_rel_err:>12.2e}"
          f" {res.seconds:>6.2f}  {flag}")

worst = max(res.max_rel_err for res in results)
print(f"\nworst over {len(results)} checks: {worst:.2e}"
      f" (tolerance {DEFAULT_TOLERANCE:g})")
assert all(res.passed() for res in results)
