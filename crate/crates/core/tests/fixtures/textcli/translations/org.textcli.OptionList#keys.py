def keys(self):
    out = []
    for o in self.__options:
        out.append(o.getKey())
    return out
