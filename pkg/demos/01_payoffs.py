"""Public goods game arithmetic, one round and then five.

Everything is in integer cents. The pool share is rounded half to even, so
a ledger never invents or loses more than half a cent per player.
"""

from __future__ import annotations

from agora import pgg

print("Four players, $20 each, multiplier 2.")
for label, contributions in [("everyone gives $10", [1000] * 4), ("Alice freeloads", [0, 1000, 1000, 1000])]:
    ledger = pgg.RoundLedger.compute(1, ["Alice", "Bob", "Casey", "David"], [2000] * 4, contributions, 2)
    pays = ", ".join(f"{n} {pgg.format_money(p)}" for n, p in zip(ledger.players, ledger.payoffs))
    print(f"  {label}: pool {pgg.format_money(ledger.pool)} -> {pays}")

print("\nHalf-cent shares: multiplier 1.5, three players.")
for pool in (1, 3, 5):
    print(f"  pool {pool} cents: exact share {1.5 * pool / 3} cents, ledger pays {pgg.pool_share(pool, pgg.as_multiplier('1.5'), 3)}")

print("\nFive rounds where everyone gives half; payoffs carry into the next endowment.")
players = ["Alice", "Bob", "Casey", "David"]
endowments = [2000] * 4
for r in range(1, 6):
    contributions = [e // 2 for e in endowments]
    ledger = pgg.RoundLedger.compute(r, players, endowments, contributions, "1.6")
    print(f"  round {r}: endowments {[pgg.format_money(e) for e in endowments]} -> payoffs {[pgg.format_money(p) for p in ledger.payoffs]}")
    endowments = pgg.carry_endowments(ledger)
