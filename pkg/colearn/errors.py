'''Exception types raised by the colearn package.'''


class ConfigError(ValueError):
    '''A configuration value or run precondition is invalid.

    Command-line scripts exit with status 2 when this is raised.
    '''


class NumericalError(ArithmeticError):
    '''A loss or gradient became NaN/Inf, or training diverged.

    Command-line scripts exit with status 3 when this is raised.
    '''
