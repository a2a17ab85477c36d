def clear(self):
    self.__options.clear()
