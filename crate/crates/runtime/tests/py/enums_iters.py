from enum import Enum
from typing import List, Optional, Dict
import io
import json
import math
from datetime import timedelta


class Color(Enum):
    RED = 1
    GREEN = 2

    def label(self) -> str:
        return self.name.lower()


class Planet(Enum):
    EARTH = (5.97, 6.37)

    def __init__(self, mass, radius):
        self.mass = mass
        self.radius = radius


print(Color.RED, Color.RED.value, Color(2), Color["GREEN"].label(), list(Color), len(Color))
print(Color.RED == Color.RED, Color.RED is Color(1), Planet.EARTH.mass, repr(Color.GREEN))


class Counter:
    def __init__(self, n):
        self.i = 0
        self.n = n

    def __iter__(self):
        return self

    def __next__(self):
        if self.i >= self.n:
            raise StopIteration
        self.i += 1
        return self.i


print(list(Counter(3)), [x for x in Counter(2)])
buf = io.BytesIO()
buf.write(b"hello")
buf.seek(0)
print(buf.read(2), buf.read(), buf.getvalue(), buf.tell())
sio = io.StringIO("a\nb\n")
print(sio.readline(), sio.read())
print(json.dumps({"a": [1, 2.5, None, True], "b": "x"}), json.loads('{"k": [1, {"z": false}]}'))
print(math.floor(2.7), math.sqrt(16), math.isclose(1.0, 1.0 + 1e-12), math.pi)
td = timedelta(seconds=90, milliseconds=5)
print(td, td.total_seconds(), td.seconds, td + timedelta(days=1), repr(timedelta(hours=1)))


def opt(x: Optional[int] = None) -> List[int]:
    return [] if x is None else [x]


print(opt(), opt(4))
g = 0


def bump():
    global g
    g += 1


def make_counter():
    count = 0

    def inc():
        nonlocal count
        count += 1
        return count

    return inc


bump()
c = make_counter()
c()
print(g, c(), (lambda a, b=2, *args, **kw: (a, b, args, kw))(1, 3, 4, z=5))
while True:
    g += 1
    if g > 5:
        break
else:
    print("never")
for i in range(3):
    if i == 1:
        continue
    print("i", i)
else:
    print("loop done")
x = [1, 2, 3]
y = x
y += [4]
print(x, x is y, (n := 10) + 1, n)
