def find(self, key):
    for o in self.__options:
        if o.getKey() == key:
            return o
    raise ValueError("unknown option: " + key)
