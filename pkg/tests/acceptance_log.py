"""One pass/fail line per acceptance criterion, printed at the end of the run."""

LINES: dict[int, str] = {}


def record(n: int, checks: dict, detail: str = "") -> bool:
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" | {detail}"
    if failed:
        line += f" | failed: {', '.join(failed)}"
    LINES[n] = line
    print(line)
    return ok
