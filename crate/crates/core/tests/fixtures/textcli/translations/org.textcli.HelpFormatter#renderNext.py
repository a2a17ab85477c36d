@staticmethod
def renderNext(cur, buf):
    o = next(cur.it)
    buf.write(o.getKey())
    cur.rendered += 1
    if operator.length_hint(cur.it) > 0:
        buf.write(HelpFormatter.__separator)
    return cur.rendered
