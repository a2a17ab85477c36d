@staticmethod
def renderNext(cur, buf):
    o = next(cur.it)
    buf.write(o.getKey())
    cur.rendered += 1
    if next(cur.it, None) is not None:
        buf.write(HelpFormatter.__separator)
    return cur.rendered
