def __init__(self, opt, long_opt, description):
    self.__option = opt
    self.__longOption = long_opt
    self.__description = description
    Option.__created += 1
