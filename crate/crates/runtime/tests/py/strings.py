s = "  Hello, World  "
print(s.strip(), s.lower(), s.upper().strip(), s.split(","), "a,b,,c".split(","), " a  b ".split())
print("-".join(["x", "y"]), "abc".replace("b", "B"), "abc".find("c"), "abc".startswith("ab"), "x".zfill(3))
print("{} and {}".format(1, "two"), "{0}{1}{0}".format("a", "b"), "{name}!".format(name="hi"))
print("%s=%d (%.2f) %5s|%-5s|%x" % ("k", 42, 3.14159, "r", "l", 255))
print(f"{3.14159:.3f} {42:05d} {'x':>4} {'y':<3}| {1234567:,} {0.25:.1%} {255:#x} {7:b}")
print(f"{'mid':^9}|{-5:+d}|{1e-5:g}|{123456789.0:e}")
print("a\tb\n".encode(), "é".encode("utf-8"), len("é"), "abc"[1], "abc"[-1], "abcdef"[1:4:2])
print(ord("A"), chr(66), "ab" * 3, "b" in "abc", str(None), repr(None), "x".isalpha(), "12".isdigit())
print("line1\nline2".splitlines(), "Title case".title(), "cap".capitalize(), "a-b-c".rsplit("-", 1))
print("%r %s" % ("q", [1, "a"]), "%%", "%05.1f" % 2.25)
