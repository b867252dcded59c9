"""Independent reference implementations used by several test modules."""

from dynlab.dgp.expr import Var


def naive_eval(tokens, z, y):
    """Recursive prefix evaluator, written without the production stack machine."""

    def go(i):
        tok = tokens[i]
        if isinstance(tok, str):
            left, i = go(i + 1)
            right, i = go(i)
            if tok == "add":
                return left + right, i
            if tok == "sub":
                return left - right, i
            return left * right, i
        if isinstance(tok, Var):
            return (z if tok.kind == "z" else y)[tok.index], i + 1
        return tok, i + 1

    value, end = go(0)
    assert end == len(tokens)
    return value
