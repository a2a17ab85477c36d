def getOptions(self):
    return self.__options
