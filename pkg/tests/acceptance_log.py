"""Shared record of acceptance outcomes, printed in the terminal summary."""

LINES: dict[str, str] = {}


def record(key: str, title: str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {key} {title}: {detail}"
    LINES[key] = line
    print(line)
    return line
