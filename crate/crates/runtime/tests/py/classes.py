class Shape:
    count = 0

    def __init__(self, name):
        self.name = name
        self.__secret = len(name)
        Shape.count += 1

    def area(self):
        raise NotImplementedError("abstract")

    def describe(self):
        return f"{self.name} with area {self.area():.2f}"

    def secret(self):
        return self.__secret

    def __repr__(self):
        return f"Shape({self.name!r})"


class Rect(Shape):
    def __init__(self, w, h):
        super().__init__("rect")
        self.w = w
        self.h = h

    def area(self):
        return self.w * self.h

    def __eq__(self, other):
        return isinstance(other, Rect) and self.w == other.w and self.h == other.h

    def __hash__(self):
        return hash((self.w, self.h))


class Square(Rect):
    def __init__(self, s):
        super(Square, self).__init__(s, s)
        self.name = "square"

    @staticmethod
    def unit():
        return Square(1)

    @classmethod
    def of(cls, s):
        return cls(s)

    @property
    def side(self):
        return self.w


r = Rect(2, 3.5)
print(r.describe())
print(Square.of(3).describe(), Square.unit().side)
print(r == Rect(2, 3.5), r != Rect(1, 1), Shape.count)
print(r.secret(), r._Shape__secret, repr(r), [r])
print(isinstance(Square(2), Shape), issubclass(Square, Rect), type(r).__name__)
print(len({Rect(1, 2), Rect(1, 2), Rect(2, 1)}))
try:
    Shape("x").area()
except NotImplementedError as e:
    print("caught", type(e).__name__, e)
print(getattr(r, "missing", 42), hasattr(r, "w"))
