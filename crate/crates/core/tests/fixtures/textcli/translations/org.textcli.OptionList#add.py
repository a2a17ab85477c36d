def add(self, option):
    self.__options.append(option)
