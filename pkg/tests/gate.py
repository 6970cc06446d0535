"""Result registry for the acceptance suite; printed at the end of the pytest run."""

RESULTS = {}


def record(n: int, title: str, ok: bool, detail: str, status: str | None = None) -> bool:
    status = status or ("PASS" if ok else "FAIL")
    line = f"criterion {n:2d} [{status}] {title}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok
