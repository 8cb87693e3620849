"""Seeded random AMR graph generator for round-trip and traversal properties.

Produces well-formed PENMAN covering the full surface: multi-sentence roots,
nested frames, name/wiki/date constructs, string/numeric/polarity attributes,
escaped characters in literals, and re-entrant references.
"""

import random

INSTANCE_POOL = [
    "run", "meet", "give", "paper", "tree", "storm", "idea", "window",
    "engine", "letter", "valley", "song", "answer", "wheel", "garden",
    "stone", "river-bank", "lamp", "harvest", "signal", "voyage", "myth",
]
FRAME_POOL = ["see-01", "want-01", "build-02", "cause-01", "say-03", "move-11"]
ROLE_POOL = [":ARG0", ":ARG1", ":ARG2", ":mod", ":time", ":location",
             ":topic", ":manner", ":domain", ":part", ":purpose"]
ENTITY_POOL = ["person", "city", "country", "organization", "team", "museum",
               "river", "company", "event", "product"]
WORD_POOL = ["Alpha", "Beta", "Gamma", "Delta", "Omega", "Sigma", "Kappa",
             "Lumen", "Vertex", "Quill", 'Say "hi"', "Back\\slash", "under_score"]


class GraphGen:
    def __init__(self, rng: random.Random, max_depth: int = 4):
        self.rng = rng
        self.max_depth = max_depth
        self.counter = 0
        self.defined: list[str] = []

    def fresh_var(self) -> str:
        self.counter += 1
        var = f"v{self.counter}"
        self.defined.append(var)
        return var

    def quoted(self, text: str) -> str:
        return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

    def name_construct(self) -> str:
        var = self.fresh_var()
        n_ops = self.rng.randint(1, 3)
        ops = " ".join(
            f":op{i} {self.quoted(self.rng.choice(WORD_POOL))}" for i in range(1, n_ops + 1)
        )
        return f"({var} / name {ops})"

    def entity_construct(self, depth: int) -> str:
        var = self.fresh_var()
        parts = [f"({var} / {self.rng.choice(ENTITY_POOL)}"]
        roll = self.rng.random()
        if roll < 0.5:
            wiki = self.rng.choice(WORD_POOL + ["Multi_Word_Page"])
            parts.append(f":wiki {self.quoted(wiki)}")
        elif roll < 0.6:
            parts.append(':wiki "-"')
        parts.append(f":name {self.name_construct()}")
        if self.rng.random() < 0.3 and depth < self.max_depth:
            parts.append(f"{self.rng.choice(ROLE_POOL)} {self.node(depth + 1)}")
        return " ".join(parts) + ")"

    def date_construct(self) -> str:
        var = self.fresh_var()
        parts = [f"({var} / date-entity"]
        if self.rng.random() < 0.6:
            parts.append(f":day {self.rng.randint(1, 31)}")
        if self.rng.random() < 0.6:
            parts.append(f":month {self.rng.randint(1, 12)}")
        if self.rng.random() < 0.8:
            parts.append(f":year {self.rng.randint(1000, 2100)}")
        return " ".join(parts) + ")"

    def attribute(self) -> str:
        roll = self.rng.random()
        if roll < 0.4:
            return self.quoted(self.rng.choice(WORD_POOL))
        if roll < 0.7:
            return str(self.rng.randint(-50, 2100))
        if roll < 0.8:
            return f"{self.rng.randint(0, 9)}.{self.rng.randint(0, 99)}"
        return self.rng.choice(["-", "+"])

    def node(self, depth: int = 0) -> str:
        var = self.fresh_var()
        label = self.rng.choice(FRAME_POOL if self.rng.random() < 0.4 else INSTANCE_POOL)
        parts = [f"({var} / {label}"]
        n_children = 0 if depth >= self.max_depth else self.rng.randint(0, 3)
        for _ in range(n_children):
            role = self.rng.choice(ROLE_POOL)
            roll = self.rng.random()
            if roll < 0.35:
                parts.append(f"{role} {self.node(depth + 1)}")
            elif roll < 0.50:
                parts.append(f"{role} {self.entity_construct(depth + 1)}")
            elif roll < 0.60:
                parts.append(f"{role} {self.date_construct()}")
            elif roll < 0.80:
                parts.append(f"{role} {self.attribute()}")
            else:
                # re-entrant reference to any already-defined variable
                parts.append(f"{role} {self.rng.choice(self.defined)}")
        return " ".join(parts) + ")"

    def graph_text(self) -> str:
        if self.rng.random() < 0.5:
            var = self.fresh_var()
            n_sentences = self.rng.randint(1, 4)
            order = list(range(1, n_sentences + 1))
            self.rng.shuffle(order)  # :sntN written out of order on purpose
            sentences = " ".join(f":snt{i} {self.node(1)}" for i in order)
            return f"({var} / multi-sentence {sentences})"
        return self.node(0)


def random_penman(seed: int) -> str:
    return GraphGen(random.Random(seed)).graph_text()
