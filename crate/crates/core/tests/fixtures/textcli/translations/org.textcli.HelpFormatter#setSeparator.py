@staticmethod
def setSeparator(separator):
    HelpFormatter.__separator = separator
