def __init__(self):
    self.__options = []
