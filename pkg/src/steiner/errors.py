"""Exception hierarchy.

Every error maps to one CLI exit code through its ``exit_code`` attribute:
2 for invalid input, 1 for a clean negative outcome, 3 for an internal
verification failure (a result that contradicts a theorem, hence a bug).
"""

from __future__ import annotations


class StsError(Exception):
    exit_code = 2


# -- invalid input (exit 2) -------------------------------------------------


class InvalidSystem(StsError):
    pass


class DuplicatePoint(InvalidSystem):
    def __init__(self, point: str):
        super().__init__(f"duplicate point {point!r}")
        self.point = point


class BadPointName(InvalidSystem):
    def __init__(self, point: object):
        super().__init__(f"invalid point name {point!r}")
        self.point = point


class NonTernaryBlock(InvalidSystem):
    def __init__(self, block: object):
        super().__init__(f"block {block!r} does not have exactly 3 members")
        self.block = block


class UnknownPoint(InvalidSystem):
    def __init__(self, point: object, where: str = ""):
        msg = f"unknown point {point!r}"
        super().__init__(msg + (f" in {where}" if where else ""))
        self.point = point


class RepeatedMemberInBlock(InvalidSystem):
    def __init__(self, block: object):
        super().__init__(f"block {block!r} repeats a member")
        self.block = block


class PairInTwoBlocks(InvalidSystem):
    def __init__(self, a: str, b: str, blocks: tuple = ()):
        a, b = sorted((a, b))
        super().__init__(f"PairInTwoBlocks({a},{b}): pair lies in blocks {list(blocks)}")
        self.pair = (a, b)
        self.blocks = blocks


class IncompatibleSystems(StsError):
    def __init__(self, pair: tuple, products: tuple = (), indices: tuple | None = None):
        where = f" (systems {indices[0]} and {indices[1]})" if indices else ""
        super().__init__(
            f"IncompatibleSystems: pair {pair} has products {products}{where}"
        )
        self.pair = pair
        self.products = products
        self.indices = indices


class NotAdmissible(StsError):
    def __init__(self, n: int):
        super().__init__(f"NotAdmissible: {n} is not 1 or 3 mod 6")
        self.n = n


class NotAHomomorphism(StsError):
    def __init__(self, block: tuple):
        super().__init__(f"NotAHomomorphism: block {block} is not preserved")
        self.block = block


class NotASubquasigroup(StsError):
    pass


class HypothesisViolated(StsError):
    def __init__(self, clause: str):
        super().__init__(f"HypothesisViolated: {clause}")
        self.clause = clause


class FamilyMemberTooSmall(StsError):
    pass


class TermSyntaxError(StsError):
    def __init__(self, text: str, position: int, message: str = "syntax error"):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position


class SizeBudgetExceeded(StsError):
    pass


class Overflow(StsError):
    pass


# -- clean negatives (exit 1) ----------------------------------------------


class SearchLimit(StsError):
    exit_code = 1


class NoCompletionWithinBound(SearchLimit):
    pass


class BudgetExceeded(SearchLimit):
    pass


class DepthExceeded(SearchLimit):
    pass


class Timeout(SearchLimit):
    pass


# -- internal verification failures (exit 3) -------------------------------


class VerificationFailed(StsError):
    exit_code = 3

    def __init__(self, component: str, detail: str = ""):
        super().__init__(f"VerificationFailed({component}) {detail}".strip())
        self.component = component


class CompatibilityCheckFailed(VerificationFailed):
    def __init__(self, claim: str, detail: str = ""):
        super().__init__(f"claim {claim}", detail)
        self.claim = claim


class AuditFailed(VerificationFailed):
    def __init__(self, prop: str, witness: object = None):
        super().__init__(f"property {prop}", f"witness: {witness!r}")
        self.prop = prop
        self.witness = witness
