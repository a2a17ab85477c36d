"""Regenerates the textcli fixture: traces/, schema.json and translations/.

The source project is modelled here with Java semantics (null vs empty
string, list iterators with a cursor, StringBuffer), and a recording tracer
emits one trace per source test in the canonical trace layout.

    python3 gen_fixture.py
"""

import json
import os
import re
import textwrap

HERE = os.path.dirname(os.path.abspath(__file__))
PKG = "org.textcli"

# ---------------------------------------------------------------------------
# Java object model


class JList:
    type_name = "java.util.ArrayList"

    def __init__(self, items=None):
        self.items = list(items or [])
        self.mod_count = 0

    def add(self, x):
        self.items.append(x)
        self.mod_count += 1

    def clear(self):
        self.items.clear()
        self.mod_count += 1

    def iterator(self):
        return JItr(self)


class JUnmodifiable:
    type_name = "java.util.Collections$UnmodifiableRandomAccessList"

    def __init__(self, backing):
        self.backing = backing


class JItr:
    type_name = "java.util.ArrayList$Itr"

    def __init__(self, lst):
        self.lst = lst
        self.cursor = 0
        self.last_ret = -1
        self.expected_mod_count = lst.mod_count

    def has_next(self):
        return self.cursor != len(self.lst.items)

    def next(self):
        if self.cursor >= len(self.lst.items):
            raise JavaException("java.util.NoSuchElementException", None)
        self.last_ret = self.cursor
        self.cursor += 1
        return self.lst.items[self.last_ret]


class JStringBuffer:
    type_name = "java.lang.StringBuffer"

    def __init__(self):
        self.text = ""

    def append(self, s):
        self.text += "null" if s is None else s


class JavaException(Exception):
    def __init__(self, type_name, message):
        super().__init__(message)
        self.type_name = type_name
        self.message = message


class JString(str):
    """Marks a value as java.lang.String (None stays null)."""


# ---------------------------------------------------------------------------
# Tracer


class Tracer:
    def __init__(self):
        self.roots = []
        self.stack = []
        self.counter = 0
        self.tokens = {}

    def token(self, obj):
        key = id(obj)
        if key not in self.tokens:
            self.tokens[key] = (obj, "@%d" % (len(self.tokens) + 1))
        return self.tokens[key][1]


TRACER = None


def value(v, declared, seen):
    """Serializes `v` (declared Java type `declared`) with a per-phase visited set."""
    if v is None:
        return {"kind": "null", "type_name": declared, "payload": {}}
    if isinstance(v, bool):
        return {"kind": "primitive", "type_name": "boolean", "payload": {"value": "true" if v else "false"}}
    if isinstance(v, int):
        return {"kind": "primitive", "type_name": "int", "payload": {"value": str(v)}}
    if isinstance(v, str):
        return {"kind": "primitive", "type_name": "java.lang.String", "payload": {"value": v}}
    tok = TRACER.token(v)
    tname = v.type_name
    if tok in seen:
        return {"kind": "reference", "type_name": tname, "payload": {"ref": tok}}
    seen.add(tok)
    head = {"kind": None, "type_name": tname, "identity": tok}
    if isinstance(v, JList):
        head["kind"] = "collection"
        head["payload"] = {"category": "list", "items": [value(x, "java.lang.Object", seen) for x in v.items]}
    elif isinstance(v, JUnmodifiable):
        head["kind"] = "collection"
        head["payload"] = {"category": "immutable_sequence", "items": [value(x, "java.lang.Object", seen) for x in v.backing.items]}
    elif isinstance(v, JItr):
        head["kind"] = "app_object"
        head["payload"] = {
            "fields": [
                field("cursor", tname, "package", v.cursor, "int", seen),
                field("lastRet", tname, "package", v.last_ret, "int", seen),
                field("expectedModCount", tname, "package", v.expected_mod_count, "int", seen),
                field("this$0", tname, "package", v.lst, "java.util.ArrayList", seen),
            ]
        }
    elif isinstance(v, JStringBuffer):
        data = v.text.encode("utf-8")
        head["kind"] = "stream"
        head["payload"] = {"byte_array": [b - 256 if b > 127 else b for b in data], "position": len(data)}
    elif isinstance(v, JavaException):
        head["kind"] = "exception"
        head["payload"] = {"message": v.message}
    else:
        head["kind"] = "app_object"
        head["payload"] = {"fields": [field(n, d, vis, getattr(v, attr), t, seen) for (n, d, vis, attr, t) in v.FIELDS]}
    return head


def field(name, declaring, visibility, v, declared, seen):
    return {"name": name, "declaring_class": declaring, "visibility": visibility, "is_static": False, "value": value(v, declared, seen)}


def statics(seen):
    return {
        PKG + ".HelpFormatter": {"separator": value(HelpFormatter.separator, "java.lang.String", seen)},
        PKG + ".Option": {"created": value(Option.created, "int", seen)},
    }


def traced(cls_name, name, signature, is_static=False, arg_types=()):
    is_ctor = name == "<init>"

    def wrap(fn):
        def run(*args):
            recv = None if is_static else args[0]
            params = list(args[1:] if not is_static else args)
            rec = {
                "method": {"class": PKG + "." + cls_name, "name": name, "signature": signature, "is_constructor": is_ctor, "is_static": is_static},
                "invocation_index": TRACER.counter,
            }
            TRACER.counter += 1
            seen = set()
            if not is_static and not is_ctor:
                rec["instance_before"] = value(recv, PKG + "." + cls_name, seen)
            rec["args_before"] = [value(p, t, seen) for p, t in zip(params, arg_types)]
            rec["static_before"] = statics(seen)
            rec["children"] = []
            parent = TRACER.stack[-1]["children"] if TRACER.stack else TRACER.roots
            parent.append(rec)
            TRACER.stack.append(rec)
            thrown = None
            result = None
            try:
                result = fn(*args)
            except JavaException as e:
                thrown = e
            TRACER.stack.pop()
            seen = set()
            after = {}
            if not is_static:
                after["instance_after"] = value(recv, PKG + "." + cls_name, seen)
            after["args_after"] = [value(p, t, seen) for p, t in zip(params, arg_types)]
            after["static_after"] = statics(seen)
            if thrown is not None:
                after["result"] = {"thrown": value(thrown, thrown.type_name, seen)}
            elif signature.endswith(")V"):
                after["result"] = {"void": True}
            else:
                after["result"] = {"return": value(result, return_type(signature), seen)}
            children = rec.pop("children")
            rec.update(after)
            rec["children"] = children
            if thrown is not None:
                raise thrown
            return result

        return run

    return wrap


def return_type(sig):
    t = sig[sig.index(")") + 1 :]
    return {"I": "int", "Z": "boolean"}.get(t, t[1:-1].replace("/", ".") if t.startswith("L") else t)


# ---------------------------------------------------------------------------
# The source project


class Option:
    type_name = PKG + ".Option"
    created = 0
    FIELDS = [
        ("option", PKG + ".Option", "private", "option", "java.lang.String"),
        ("longOption", PKG + ".Option", "private", "long_option", "java.lang.String"),
        ("description", PKG + ".Option", "private", "description", "java.lang.String"),
    ]

    @traced("Option", "<init>", "(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;)V", arg_types=["java.lang.String"] * 3)
    def __init__(self, opt, long_opt, description):
        self.option = opt
        self.long_option = long_opt
        self.description = description
        Option.created += 1

    @traced("Option", "getKey", "()Ljava/lang/String;")
    def getKey(self):
        return self.long_option if self.option is None else self.option

    @traced("Option", "hasLongOpt", "()Z")
    def hasLongOpt(self):
        return self.long_option is not None

    @traced("Option", "getDescription", "()Ljava/lang/String;")
    def getDescription(self):
        return self.description


class OptionList:
    type_name = PKG + ".OptionList"
    FIELDS = [("options", PKG + ".OptionList", "private", "options", "java.util.List")]

    @traced("OptionList", "<init>", "()V")
    def __init__(self):
        self.options = JList()

    @traced("OptionList", "add", "(Lorg/textcli/Option;)V", arg_types=[PKG + ".Option"])
    def add(self, o):
        self.options.add(o)

    @traced("OptionList", "keys", "()Ljava/util/List;")
    def keys(self):
        out = JList()
        for o in list(self.options.items):
            out.add(o.getKey())
        return out

    @traced("OptionList", "find", "(Ljava/lang/String;)Lorg/textcli/Option;", arg_types=["java.lang.String"])
    def find(self, key):
        for o in list(self.options.items):
            if o.getKey() == key:
                return o
        raise JavaException("java.lang.IllegalArgumentException", "unknown option: " + key)

    @traced("OptionList", "size", "()I")
    def size(self):
        return len(self.options.items)

    @traced("OptionList", "asList", "()Ljava/util/List;")
    def asList(self):
        return JUnmodifiable(self.options)

    @traced("OptionList", "getOptions", "()Ljava/util/List;")
    def getOptions(self):
        return self.options

    @traced("OptionList", "clear", "()V")
    def clear(self):
        self.options.clear()


class HelpCursor:
    type_name = PKG + ".HelpCursor"
    FIELDS = [
        ("it", PKG + ".HelpCursor", "package", "it", "java.util.Iterator"),
        ("rendered", PKG + ".HelpCursor", "package", "rendered", "int"),
    ]

    @traced("HelpCursor", "<init>", "(Ljava/util/List;)V", arg_types=["java.util.List"])
    def __init__(self, opts):
        self.it = opts.iterator()
        self.rendered = 0

    @traced("HelpCursor", "hasMore", "()Z")
    def hasMore(self):
        return self.it.has_next()


class HelpFormatter:
    separator = ", "

    @staticmethod
    @traced("HelpFormatter", "setSeparator", "(Ljava/lang/String;)V", is_static=True, arg_types=["java.lang.String"])
    def setSeparator(s):
        HelpFormatter.separator = s

    @staticmethod
    @traced("HelpFormatter", "renderNext", "(Lorg/textcli/HelpCursor;Ljava/lang/StringBuffer;)I", is_static=True, arg_types=[PKG + ".HelpCursor", "java.lang.StringBuffer"])
    def renderNext(cur, buf):
        o = cur.it.next()
        buf.append(o.getKey())
        cur.rendered += 1
        if cur.it.has_next():
            buf.append(HelpFormatter.separator)
        return cur.rendered

    @staticmethod
    @traced("HelpFormatter", "render", "(Ljava/util/List;)Ljava/lang/String;", is_static=True, arg_types=["java.util.List"])
    def render(opts):
        cur = HelpCursor(opts)
        buf = JStringBuffer()
        while cur.hasMore():
            HelpFormatter.renderNext(cur, buf)
        return buf.text


# ---------------------------------------------------------------------------
# Source tests (each becomes one trace)


def opts(*specs):
    lst = OptionList()
    for s in specs:
        lst.add(Option(*s))
    return lst


V = ("v", "verbose", "print more")
H = (None, "help", "show help")
Q = ("", "quiet", "print less")
X = ("x", None, "extract")
F = ("f", "file", "input file")

TESTS = {}


def test(fn):
    TESTS["%s.%s#%s" % (PKG, fn.__qualname__.split(".")[0], fn.__name__)] = fn
    return fn


class OptionTest:
    @test
    def testGetKeyShort():
        Option(*V).getKey()

    @test
    def testGetKeyLongOnly():
        Option(*H).getKey()

    @test
    def testGetKeyEmptyShort():
        Option(*Q).getKey()

    @test
    def testHasLongOpt():
        Option(*V).hasLongOpt()

    @test
    def testHasNoLongOpt():
        Option(*X).hasLongOpt()

    @test
    def testDescription():
        Option(*F).getDescription()

    @test
    def testConstructCountsInstances():
        Option(*V)
        Option(*H)

    @test
    def testGetKeyTwice():
        o = Option(*F)
        o.getKey()
        o.getKey()


class OptionListTest:
    @test
    def testEmpty():
        OptionList().size()

    @test
    def testAddOne():
        opts(V).size()

    @test
    def testAddMany():
        opts(V, H, Q).size()

    @test
    def testKeys():
        opts(V, H).keys()

    @test
    def testKeysWithEmptyShort():
        opts(Q, X).keys()

    @test
    def testFindFirst():
        opts(V, H).find("v")

    @test
    def testFindByLongName():
        opts(V, H).find("help")

    @test
    def testFindMissing():
        try:
            opts(V).find("zzz")
        except JavaException:
            pass

    @test
    def testFindInEmpty():
        try:
            OptionList().find("v")
        except JavaException:
            pass

    @test
    def testAsList():
        opts(V, F).asList()

    @test
    def testAsListEmpty():
        OptionList().asList()

    @test
    def testGetOptionsAliases():
        lst = opts(X)
        lst.getOptions()
        lst.size()


class HelpCursorTest:
    @test
    def testFreshCursorHasMore():
        HelpCursor(opts(V).getOptions()).hasMore()

    @test
    def testEmptyCursor():
        HelpCursor(OptionList().getOptions()).hasMore()


class HelpFormatterTest:
    @test
    def testRenderOne():
        HelpFormatter.render(opts(V).getOptions())

    @test
    def testRenderThree():
        HelpFormatter.render(opts(V, H, X).getOptions())

    @test
    def testRenderEmpty():
        HelpFormatter.render(OptionList().getOptions())

    @test
    def testRenderCustomSeparator():
        HelpFormatter.setSeparator(" | ")
        HelpFormatter.render(opts(V, F).getOptions())
        HelpFormatter.setSeparator(", ")

    @test
    def testRenderNextFirstOfThree():
        cur = HelpCursor(opts(V, H, X).getOptions())
        HelpFormatter.renderNext(cur, JStringBuffer())

    @test
    def testRenderNextLast():
        cur = HelpCursor(opts(F).getOptions())
        HelpFormatter.renderNext(cur, JStringBuffer())

    @test
    def testRenderNextMiddle():
        cur = HelpCursor(opts(V, F, H).getOptions())
        buf = JStringBuffer()
        HelpFormatter.renderNext(cur, buf)
        HelpFormatter.renderNext(cur, buf)

    @test
    def testRenderNextPastEnd():
        cur = HelpCursor(OptionList().getOptions())
        try:
            HelpFormatter.renderNext(cur, JStringBuffer())
        except JavaException:
            pass

    @test
    def testSetSeparator():
        HelpFormatter.setSeparator("; ")
        HelpFormatter.setSeparator(", ")

    @test
    def testRenderQuietOption():
        HelpFormatter.render(opts(Q, V).getOptions())


# Translated source tests whose run did not pass: a Java exception type the
# translated test still expects by name.
TEST_FAILURES = {PKG + ".HelpFormatterTest#testRenderNextPastEnd": "fail_runtime"}


def covered(roots):
    out = set()
    stack = list(roots)
    while stack:
        r = stack.pop()
        out.add("%s#%s" % (r["method"]["class"], r["method"]["name"]))
        stack.extend(r["children"])
    return sorted(out)


def run_tests():
    global TRACER
    out = os.path.join(HERE, "traces")
    os.makedirs(out, exist_ok=True)
    for name in os.listdir(out):
        os.remove(os.path.join(out, name))
    results = []
    for test_id, fn in sorted(TESTS.items()):
        TRACER = Tracer()
        Option.created = 0
        HelpFormatter.separator = ", "
        fn()
        doc = {"schema_version": "1", "test_id": test_id, "roots": TRACER.roots}
        with open(os.path.join(out, test_id + ".trace"), "w", encoding="utf-8") as f:
            f.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
        results.append({"test_id": test_id, "status": TEST_FAILURES.get(test_id, "pass"), "covers": covered(TRACER.roots)})
    with open(os.path.join(HERE, "test_results.json"), "w", encoding="utf-8") as f:
        f.write(json.dumps({"tests": results}, indent=2) + "\n")
    return len(TESTS)


# ---------------------------------------------------------------------------
# Decomposed project schema

JAVA = {
    "Option": """public class Option {
    private static int created = 0;
    private String option;
    private String longOption;
    private String description;

    public Option(String opt, String longOpt, String description) {
        this.option = opt;
        this.longOption = longOpt;
        this.description = description;
        created++;
    }

    public String getKey() {
        return option == null ? longOption : option;
    }

    public boolean hasLongOpt() {
        return longOption != null;
    }

    public String getDescription() {
        return description;
    }
}
""",
    "OptionList": """public class OptionList {
    private List<Option> options = new ArrayList<>();

    public OptionList() {
    }

    public void add(Option o) {
        options.add(o);
    }

    public List<String> keys() {
        List<String> out = new ArrayList<>();
        for (Option o : options) {
            out.add(o.getKey());
        }
        return out;
    }

    public Option find(String key) {
        for (Option o : options) {
            if (o.getKey().equals(key)) {
                return o;
            }
        }
        throw new IllegalArgumentException("unknown option: " + key);
    }

    public int size() {
        return options.size();
    }

    public List<Option> asList() {
        return Collections.unmodifiableList(options);
    }

    public List<Option> getOptions() {
        return options;
    }

    public void clear() {
        options.clear();
    }
}
""",
    "HelpCursor": """public class HelpCursor {
    Iterator<Option> it;
    int rendered;

    public HelpCursor(List<Option> opts) {
        it = opts.iterator();
        rendered = 0;
    }

    public boolean hasMore() {
        return it.hasNext();
    }
}
""",
    "HelpFormatter": """public class HelpFormatter {
    private static String separator = ", ";

    public static void setSeparator(String s) {
        separator = s;
    }

    public static int renderNext(HelpCursor cur, StringBuffer buf) {
        Option o = cur.it.next();
        buf.append(o.getKey());
        cur.rendered++;
        if (cur.it.hasNext()) {
            buf.append(separator);
        }
        return cur.rendered;
    }

    public static String render(List<Option> opts) {
        HelpCursor cur = new HelpCursor(opts);
        StringBuffer buf = new StringBuffer();
        while (cur.hasMore()) {
            renderNext(cur, buf);
        }
        return buf.toString();
    }
}
""",
}

# (class, member, kind, callees, [(type, symbol, role)])
MEMBERS = [
    ("Option", "created", "field", [], []),
    ("Option", "option", "field", [], [("java.lang.String", "option", "field")]),
    ("Option", "longOption", "field", [], [("java.lang.String", "longOption", "field")]),
    ("Option", "description", "field", [], [("java.lang.String", "description", "field")]),
    ("Option", "<init>", "constructor", [], [("java.lang.String", "opt", "parameter"), ("java.lang.String", "longOpt", "parameter"), ("java.lang.String", "description", "parameter")]),
    ("Option", "getKey", "method", [], [("java.lang.String", "getKey", "return")]),
    ("Option", "hasLongOpt", "method", [], []),
    ("Option", "getDescription", "method", [], [("java.lang.String", "getDescription", "return")]),
    ("OptionList", "options", "field", [], [("java.util.List<org.textcli.Option>", "options", "field"), ("java.util.ArrayList", "options", "body")]),
    ("OptionList", "<init>", "constructor", [], []),
    ("OptionList", "add", "method", [], []),
    ("OptionList", "keys", "method", ["Option#getKey"], [("java.util.List<java.lang.String>", "keys", "return"), ("java.util.List<java.lang.String>", "out", "local"), ("java.util.ArrayList", "out", "body")]),
    ("OptionList", "find", "method", ["Option#getKey"], [("java.lang.String", "key", "parameter"), ("java.lang.IllegalArgumentException", "find", "body")]),
    ("OptionList", "size", "method", [], []),
    ("OptionList", "asList", "method", [], [("java.util.List<org.textcli.Option>", "asList", "return")]),
    ("OptionList", "getOptions", "method", [], [("java.util.List<org.textcli.Option>", "getOptions", "return")]),
    ("OptionList", "clear", "method", [], []),
    ("HelpCursor", "it", "field", [], [("java.util.Iterator<org.textcli.Option>", "it", "field")]),
    ("HelpCursor", "rendered", "field", [], []),
    ("HelpCursor", "<init>", "constructor", [], [("java.util.List<org.textcli.Option>", "opts", "parameter")]),
    ("HelpCursor", "hasMore", "method", [], []),
    ("HelpFormatter", "separator", "field", [], [("java.lang.String", "separator", "field")]),
    ("HelpFormatter", "setSeparator", "method", [], [("java.lang.String", "s", "parameter")]),
    ("HelpFormatter", "renderNext", "method", ["Option#getKey"], [("java.lang.StringBuffer", "buf", "parameter")]),
    ("HelpFormatter", "render", "method", ["HelpCursor#<init>", "HelpCursor#hasMore", "HelpFormatter#renderNext"], [("java.util.List<org.textcli.Option>", "opts", "parameter"), ("java.lang.StringBuffer", "buf", "local")]),
]


def member_span(cls, member, kind):
    """1-based line span of a member in the class's Java text."""
    lines = JAVA[cls].splitlines()
    if kind == "field":
        pat = re.compile(r"^\s+[\w<>, ]+\b%s\b( =|;)" % re.escape(member))
    elif kind == "constructor":
        pat = re.compile(r"^\s+public %s\(" % cls)
    else:
        pat = re.compile(r"^\s+public [\w<>, ]+ %s\(" % re.escape(member))
    for i, line in enumerate(lines):
        if pat.search(line):
            if kind == "field":
                return i + 1, i + 1
            depth = 0
            for j in range(i, len(lines)):
                depth += lines[j].count("{") - lines[j].count("}")
                if depth == 0 and "}" in lines[j]:
                    return i + 1, j + 1
    raise KeyError((cls, member))


def schema():
    frags = []
    for cls, member, kind, callees, types in MEMBERS:
        start, end = member_span(cls, member, kind)
        lines = JAVA[cls].splitlines()
        code = textwrap.dedent("\n".join(lines[start - 1 : end])) + "\n"
        uses = []
        for t, sym, role in types:
            line = next((start + k for k, l in enumerate(lines[start - 1 : end]) if re.search(r"\b%s\b" % re.escape(sym), l)), start)
            uses.append({"source_type": t, "line": line, "symbol": sym, "role": role})
        frags.append(
            {
                "id": "%s.%s#%s" % (PKG, cls, member),
                "class": "%s.%s" % (PKG, cls),
                "name": member,
                "kind": kind,
                "file": "src/main/java/org/textcli/%s.java" % cls,
                "start_line": start,
                "end_line": end,
                "code": code,
                "callees": ["%s.%s" % (PKG, c) for c in callees],
                "types": uses,
            }
        )
    doc = {"project": "textcli", "application_classes": ["%s.%s" % (PKG, c) for c in JAVA], "fragments": frags}
    with open(os.path.join(HERE, "schema.json"), "w", encoding="utf-8") as f:
        f.write(json.dumps(doc, indent=2) + "\n")
    return frags


# ---------------------------------------------------------------------------
# Per-fragment translations cut from the translated project

MODULES = {"Option": "option", "OptionList": "option_list", "HelpCursor": "help_cursor", "HelpFormatter": "help_formatter"}


def methods_of(path):
    """Member definitions (with decorators) of the single class in `path`, dedented."""
    lines = open(path, encoding="utf-8").read().splitlines()
    out = {}
    i = 0
    while i < len(lines):
        if lines[i].startswith("    @") or lines[i].startswith("    def "):
            start = i
            while not lines[i].startswith("    def "):
                i += 1
            name = re.match(r"^    def (\w+)", lines[i]).group(1)
            i += 1
            while i < len(lines) and (lines[i].startswith("        ") or lines[i].strip() == ""):
                i += 1
            body = "\n".join(lines[start:i]).rstrip() + "\n"
            out[name] = textwrap.dedent(body)
        else:
            i += 1
    return out


def translations(frags):
    out = os.path.join(HERE, "translations")
    for name in os.listdir(out):
        os.remove(os.path.join(out, name))
    count = 0
    for f in frags:
        if f["kind"] == "field":
            continue
        cls = f["class"].rsplit(".", 1)[1]
        defs = methods_of(os.path.join(HERE, "py", "textcli", MODULES[cls] + ".py"))
        member = "__init__" if f["name"] == "<init>" else f["name"]
        stem = f["id"].replace("<init>", "__init__")
        with open(os.path.join(out, stem + ".py"), "w", encoding="utf-8") as fh:
            fh.write(defs[member])
        count += 1
    return count


if __name__ == "__main__":
    n = run_tests()
    frags = schema()
    t = translations(frags)
    print("%d traces, %d fragments, %d translations" % (n, len(frags), t))
