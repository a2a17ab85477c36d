def hasLongOpt(self):
    return self.__longOption is not None
