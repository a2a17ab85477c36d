def getKey(self):
    return self.__longOption if self.__option is None else self.__option
