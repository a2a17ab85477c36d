class Option:
    __created = 0

    def __init__(self, opt, long_opt, description):
        self.__option = opt
        self.__longOption = long_opt
        self.__description = description
        Option.__created += 1

    def getKey(self):
        return self.__longOption if self.__option is None else self.__option

    def hasLongOpt(self):
        return self.__longOption is not None

    def getDescription(self):
        return self.__description
