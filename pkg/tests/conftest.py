"""Prints one pass/fail line per acceptance criterion after the run."""

CRITERIA = {
    "test_criterion_01": "1. uniform DOF sequences (zero tolerance)",
    "test_criterion_02": "2. square Morley tables (±0.05 abs or 1e-4 rel)",
    "test_criterion_03": "3. BFS upper bounds (square ±0.01/±0.05, L-shape ±0.5)",
    "test_criterion_04": "4. L-shape Morley tables (5e-3 rel) + exact monotone increase",
    "test_criterion_05": "5. bracketing: Morley <= finest BFS (zero violations)",
    "test_criterion_06": "6. monotonicity: uniform strict, adaptive after iter 3",
    "test_criterion_07": "7. adaptive: iter-1 Ndof exact + lambda1 windows at Ndof>=1e5",
    "test_criterion_08": "8. eigensolver vs dense Jacobi oracle (1e-8 rel, n<=500)",
    "test_criterion_09": "9. property suites (patch 1e-10, exact symmetry, B-norm 1e-10, "
    "NVB 45 deg, Dorfler minimality, estimator zeros, identity dominance)",
    "test_criterion_10": "10. adaptive eta^2 slope in [-1.25, -0.75] (tau 0/10/100, j 1/2)",
}

_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    for key in CRITERIA:
        if name.startswith(key):
            _results[key] = report.outcome
            break


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key, desc in CRITERIA.items():
        outcome = _results.get(key, "not run")
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper()
        )
        terminalreporter.write_line(f"{status:4s}  {desc}")
