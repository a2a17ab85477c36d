xs = [5, 3, 8, 1]
xs.append(9)
xs.sort()
print(xs, xs[1:3], xs[::-1], xs[-2:], len(xs), sum(xs), min(xs), max(xs))
d = {"b": 2, "a": 1}
d["c"] = 3
print(d, list(d.keys()), sorted(d.items()), d.get("z", 0), "a" in d)
del d["a"]
print(d.pop("b"), d, d.setdefault("q", []), d)
s = {3, 1, 2}
s.add(2)
print(sorted(s), len(s), 2 in s, sorted(s | {9}), sorted(s & {1, 9}))
t = (1, "two", 3.0)
print(t, t[1], t.index(3.0), t + (4,), t * 2 if False else None)
a, *rest = [1, 2, 3, 4]
print(a, rest)
print([x * x for x in range(6) if x % 2 == 0], {k: v for k, v in zip("abc", range(3))})
print({x % 3 for x in range(10)}, list(map(str, [1, 2])), list(filter(None, [0, 1, 2])))
print(list(enumerate("ab", 1)), list(reversed([1, 2, 3])), sorted(["bb", "a", "ccc"], key=len, reverse=True))
print(any(x > 2 for x in xs), all([]), divmod(-7, 2), -7 // 2, -7 % 2, 7 / 2, 2 ** 10, 2 ** -1)
it = iter([10, 20])
print(next(it), next(it), next(it, None))
m = [[0] * 2 for _ in range(2)]
m[0][1] = 5
print(m, [1, 2] == [1, 2], (1, 2) < (1, 3), "abc" < "abd")
nested = {"k": [1, {"z": None}]}
print(nested, str(nested), repr("it's"), repr('say "hi"'))
b = bytearray(b"ab")
b.append(99)
print(b, bytes(b), b"\x00\xff", list(b"hi"), b.decode())
print(1e20, 1.5e-7, 0.1 + 0.2, float("inf"), -0.0, 3.0, 1 / 3, round(2.5), round(3.14159, 2))
print(int("42") + int(3.9), float("1.5"), str(12), bool([]), bool("x"), True + 1)
