"""One PASS/FAIL line per acceptance criterion, echoed in the terminal summary."""

LINES = {}


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[n] = line
    print(line)
    return ok
