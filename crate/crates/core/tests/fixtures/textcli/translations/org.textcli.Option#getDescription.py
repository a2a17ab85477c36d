def getDescription(self):
    return self.__description
