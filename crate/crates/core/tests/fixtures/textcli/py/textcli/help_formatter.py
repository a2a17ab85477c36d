import io
import operator

from textcli.help_cursor import HelpCursor


class HelpFormatter:
    __separator = ", "

    @staticmethod
    def setSeparator(separator):
        HelpFormatter.__separator = separator

    @staticmethod
    def renderNext(cur, buf):
        o = next(cur.it)
        buf.write(o.getKey())
        cur.rendered += 1
        if operator.length_hint(cur.it) > 0:
            buf.write(HelpFormatter.__separator)
        return cur.rendered

    @staticmethod
    def render(opts):
        cur = HelpCursor(opts)
        buf = io.StringIO()
        while cur.hasMore():
            HelpFormatter.renderNext(cur, buf)
        return buf.getvalue()
