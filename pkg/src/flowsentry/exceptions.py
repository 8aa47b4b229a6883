"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or contract-violating input data (bad CSV cell, time regression, ...).

    The CLI maps this to exit code 3.
    """
