class AppError(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


def risky(n):
    if n == 0:
        raise AppError(7, "zero")
    if n == 1:
        return {}["k"]
    if n == 2:
        return [1][5]
    if n == 3:
        return 1 // 0
    if n == 4:
        return int("abc")
    return n


for n in range(6):
    try:
        print("ok", risky(n))
    except AppError as e:
        print("app", e.code, str(e), e.args)
    except (KeyError, IndexError) as e:
        print("lookup", type(e).__name__, repr(e))
    except ArithmeticError as e:
        print("arith", e)
    except Exception as e:
        print("other", type(e).__name__, e)
    finally:
        print("finally", n)


def nested():
    try:
        try:
            raise ValueError("inner")
        except ValueError as e:
            raise RuntimeError("outer") from e
    except RuntimeError as e:
        return (str(e), str(e.__cause__))


print(nested())


def finally_return():
    try:
        return "try"
    finally:
        print("cleanup")


print(finally_return())
try:
    assert 1 == 2, "mismatch"
except AssertionError as e:
    print("assert", e)
try:
    raise KeyError("x")
except LookupError as e:
    print(repr(e), str(e))
else_hit = []
try:
    pass
except Exception:
    pass
else:
    else_hit.append(1)
print(else_hit)
