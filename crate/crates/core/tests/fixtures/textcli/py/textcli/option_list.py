from textcli.option import Option


class OptionList:
    def __init__(self):
        self.__options = []

    def add(self, option):
        self.__options.append(option)

    def keys(self):
        out = []
        for o in self.__options:
            out.append(o.getKey())
        return out

    def find(self, key):
        for o in self.__options:
            if o.getKey() == key:
                return o
        raise ValueError("unknown option: " + key)

    def size(self):
        return len(self.__options)

    def asList(self):
        return tuple(self.__options)

    def getOptions(self):
        return self.__options

    def clear(self):
        self.__options.clear()
