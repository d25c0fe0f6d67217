"""Shared helpers: policy corpora, brute-force oracles, random builders."""

from __future__ import annotations

import itertools
import random
from typing import List, Sequence, Tuple

from poc_platform import policy

UNIVERSE_4 = ("ns:a", "ns:b", "ns:c", "ns:d")


def grid_policies(universe: Sequence[str] = UNIVERSE_4) -> List[str]:
    """A fixed grid of >= 20 policies with tree depth <= 3 over 4 attributes."""
    a, b, c, d = universe
    return [
        a,
        b,
        f"{a} AND {b}",
        f"{c} AND {d}",
        f"{a} OR {b}",
        f"{c} OR {d}",
        f"{a} AND {b} AND {c}",
        f"{a} OR {b} OR {c} OR {d}",
        f"{a} AND {b} OR {c}",
        f"{a} OR {b} AND {c}",
        f"({a} OR {b}) AND ({c} OR {d})",
        f"({a} AND {b}) OR ({c} AND {d})",
        f"2of({a}, {b}, {c})",
        f"2of({a}, {b}, {c}, {d})",
        f"3of({a}, {b}, {c}, {d})",
        f"4of({a}, {b}, {c}, {d})",
        f"1of({a}, {b})",
        f"2of({a} AND {b}, {c}, {d})",
        f"2of({a} OR {b}, {c} AND {d}, {a})",
        f"{a} AND ({b} OR 2of({b}, {c}, {d}))",
        f"2of(2of({a}, {b}, {c}), {d}, {a} AND {b})",
        f"({a} OR {b} OR {c}) AND {d}",
    ]


def all_subsets(universe: Sequence[str] = UNIVERSE_4):
    for r in range(len(universe) + 1):
        for combo in itertools.combinations(universe, r):
            yield frozenset(combo)


def eval_policy(node, attrs) -> bool:
    """Independent recursive truth evaluator (the oracle for `satisfies`)."""
    attrs = {str(policy.Attribute.parse(a)) for a in attrs}

    def go(n):
        if isinstance(n, policy.Leaf):
            return str(n.attribute) in attrs
        return sum(go(ch) for ch in n.children) >= n.k
    return go(node)


def random_policy(rng: random.Random, universe: Sequence[str], depth: int):
    """Random monotone policy AST of at most the given depth."""
    if depth == 0 or rng.random() < 0.3:
        return policy.Leaf(policy.Attribute.parse(rng.choice(universe)))
    n = rng.randint(2, 4)
    children = tuple(random_policy(rng, universe, depth - 1) for _ in range(n))
    kind = rng.choice(("and", "or", "kofn"))
    if kind == "and":
        k = n
    elif kind == "or":
        k = 1
    else:
        k = rng.randint(1, n)
    return policy.Gate(k=k, children=children)


def plateau_oracle(burst, rel_tol: float = 0.02, hold_s: float = 20.0) -> Tuple[float, float, bool]:
    """Quadratic brute-force plateau scan (reference for detect_plateau)."""
    import math

    t_end = burst[-1][0]
    tail = [v for t, v in burst if t >= t_end - hold_s]
    plateau = sum(tail) / len(tail)
    if t_end - burst[0][0] < hold_s:
        return (math.nan, plateau, False)
    band = rel_tol * abs(plateau)
    for t_i, _ in burst:
        if t_i > t_end - hold_s:
            break
        if all(abs(v - plateau) <= band for t, v in burst if t_i <= t <= t_i + hold_s):
            return (t_i, plateau, True)
    return (math.nan, plateau, False)


class TrafficRecorder:
    """ASGI middleware capturing raw request and response bodies."""

    def __init__(self, app):
        self.app = app
        self.bodies: List[bytes] = []

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return

        async def recv():
            message = await receive()
            if message["type"] == "http.request":
                self.bodies.append(message.get("body", b""))
            return message

        async def snd(message):
            if message["type"] == "http.response.body":
                self.bodies.append(message.get("body", b""))
            await send(message)

        await self.app(scope, recv, snd)


def start_live_server(app):
    """Run an ASGI app on a random local port; returns (base_url, stop)."""
    import threading
    import time

    import uvicorn

    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("hub server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]

    def stop():
        server.should_exit = True
        thread.join(timeout=5)

    return f"http://127.0.0.1:{port}", stop
