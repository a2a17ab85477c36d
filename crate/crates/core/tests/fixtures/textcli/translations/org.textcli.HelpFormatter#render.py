@staticmethod
def render(opts):
    cur = HelpCursor(opts)
    buf = io.StringIO()
    while cur.hasMore():
        HelpFormatter.renderNext(cur, buf)
    return buf.getvalue()
