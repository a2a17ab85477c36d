def size(self):
    return len(self.__options)
