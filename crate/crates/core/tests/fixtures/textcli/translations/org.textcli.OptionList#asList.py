def asList(self):
    return tuple(self.__options)
