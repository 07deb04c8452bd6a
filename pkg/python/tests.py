# Runtime validation for the Spike Deblur Toolkit. Every module runs these checks on its
# inputs and outputs, so bad data is stopped at the boundary where it enters. Runtime
# errors are raised if the checks fail, with further information sent to log file.
# https://docs.python.org/3/howto/logging.html

import inspect
import logging
import numbers
import textwrap

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


#########
# TESTS #
#########


def validate_data(table_name: str, data: np.ndarray | pd.DataFrame, **kwargs) -> None:
    """Run the specified tests on the input data

    kwargs provides both the name of the test (the name of the keyword argument) and the
    parameters which go into the test (the value of the keyword argument). The exact
    keyword argument names which are allowed are determined by the tests which have been
    implemented in this file. Unless otherwise noted, the string name of the implemented
    tests is the part of the function name after '_validate_'. For example, the string
    name of '_validate_shape()' is 'shape'.

    The value of kwargs are the parameters which go into the test, stored in dictionary
    form. The key of the dictionary should be the name of the parameter, while the value
    is the parameter itself. Since every single test requires the 'table_name' and
    'data' parameters, they should not be included in the parameter dictionary. If the
    test requires no additional parameters, an empty dictionary must be passed

    Since kwargs are passed into individual tests, validation is first done to make
    sure each test has all required input arguments. Once validation is passed, all
    requested tests are run

    Args:
        table_name: A descriptive name of the data being tested. Only used when printing
            out error messages
        data: The data to test, either an array or a table
        kwargs: The tests to run. The key is the name of the test and the value is a
            dictionary, possibly empty, for the parameters which go into the test

    Raises:
        ValueError: If an error has been encountered relating to the requested test or
            the input parameters to the requested test
        ValueError: Any of the errors raised by the individual tests. See each test
            for additional details
    """
    all_tests = [
        _validate_shape,
        _validate_finite,
        _validate_bounds,
        _validate_binary,
        _validate_negative,
        _validate_null,
    ]

    # For each test, get the actual test name by removing the '_validate_'
    all_tests = {test.__name__.replace("_validate_", ""): test for test in all_tests}

    # For the input list of tests, check to make sure that the test exists
    for test_name in kwargs.keys():
        if test_name not in all_tests.keys():
            raise ValueError(
                f"The test '{test_name}' was requested but cannot be found."
            )

    # For each test, make sure that the correct input values are passed
    for test_name, test in all_tests.items():
        if test_name not in kwargs.keys():
            continue

        # Every test requires the 'table_name' and 'data' parameters. Copy so the
        # caller's parameter dictionaries are never modified
        kwargs[test_name] = dict(kwargs[test_name])
        kwargs[test_name]["table_name"] = table_name
        kwargs[test_name]["data"] = data

        # Loop over the parameters for this test
        test_signature = inspect.signature(test)
        for parameter_name, parameter_details in test_signature.parameters.items():
            if parameter_name in ("table_name", "data"):
                continue

            # If the parameter does not have a default value, then it must be in kwargs
            if parameter_details.default is inspect.Parameter.empty:
                if parameter_name not in kwargs[test_name].keys():
                    raise ValueError(
                        f"The parameter '{parameter_name}' is a required argument for "
                        f"the test '{test_name}' but it is missing"
                    )

            # Make sure the type of parameter provided to kwargs is correct
            if parameter_name in kwargs[test_name].keys():
                value = kwargs[test_name][parameter_name]
                if not _matches_annotation(value, parameter_details.annotation):
                    raise ValueError(
                        f"The parameter '{parameter_name}' is supposed to be of "
                        f"type '{parameter_details.annotation}' but is actually of "
                        f"type {type(value)}"
                    )

    # And now we can actually run the tests
    for test_name, test_parameters in kwargs.items():
        all_tests[test_name](**test_parameters)


def _matches_annotation(value, annotation) -> bool:
    """Loose type check of a test parameter against its annotation"""
    if value is None:
        return True
    if annotation is float:
        return isinstance(value, numbers.Real) and not isinstance(value, bool)
    if annotation is int:
        return isinstance(value, numbers.Integral) and not isinstance(value, bool)
    if annotation == tuple[int, ...]:
        return isinstance(value, tuple) and all(
            isinstance(v, numbers.Integral) for v in value
        )
    if annotation == list[str]:
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if isinstance(annotation, type):
        return isinstance(value, annotation)
    return True


def _log_offenders(table_name: str, description: str, data: np.ndarray, mask) -> None:
    """Log the first few offending entries of an array at DEBUG level"""
    positions = np.argwhere(mask)[:5]
    rows = [f"{tuple(int(p) for p in pos)}: {data[tuple(pos)]!r}" for pos in positions]
    logger.debug(
        f"'{table_name}' {description}. Some of the associated entries are:\n"
        + textwrap.indent("\n".join(rows), "\t")
    )


def _validate_shape(
    table_name: str, data: np.ndarray, shape: tuple[int, ...]
) -> None:
    """Verify that the provided array has the expected shape

    Args:
        table_name: The name of the data. The only purpose of this is to make error
            messages more descriptive
        data: The array to check
        shape: The expected shape. A negative entry matches any length along that axis

    Raises:
        ValueError: When the number of dimensions or any fixed axis length differs
    """
    actual = np.shape(data)
    if len(actual) != len(shape) or any(
        expected >= 0 and expected != size for expected, size in zip(shape, actual)
    ):
        raise ValueError(
            f"'{table_name}' should have shape {shape} but it has shape {actual}"
        )


def _validate_finite(table_name: str, data: np.ndarray) -> None:
    """Verify that the provided array only contains finite values

    Raises:
        ValueError: When NaN or infinite values are encountered
    """
    values = np.asarray(data, dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        _log_offenders(table_name, "contains non-finite values", values, bad)
        raise ValueError(
            f"'{table_name}' contains {int(bad.sum())} non-finite values. "
            f"See log for details."
        )


def _validate_bounds(
    table_name: str,
    data: np.ndarray,
    low: float,
    high: float,
    high_inclusive: bool = True,
) -> None:
    """Verify that every value of the provided array lies inside a range

    Args:
        table_name: The name of the data. The only purpose of this is to make error
            messages more descriptive
        data: The array to check
        low: The inclusive lower bound
        high: The upper bound
        high_inclusive (optional): Whether 'high' itself is allowed

    Raises:
        ValueError: When values outside of the range are encountered
    """
    values = np.asarray(data, dtype=np.float64)
    above = values > high if high_inclusive else values >= high
    bad = (values < low) | above
    if bad.any():
        closing = "]" if high_inclusive else ")"
        _log_offenders(
            table_name, f"contains values outside [{low}, {high}{closing}", values, bad
        )
        raise ValueError(
            f"'{table_name}' contains {int(bad.sum())} values outside "
            f"[{low}, {high}{closing}. See log for details."
        )


def _validate_binary(table_name: str, data: np.ndarray) -> None:
    """Verify that the provided array only contains zeros and ones

    Raises:
        ValueError: When any other value is encountered
    """
    values = np.asarray(data)
    bad = (values != 0) & (values != 1)
    if bad.any():
        _log_offenders(table_name, "contains non-binary values", values, bad)
        raise ValueError(
            f"'{table_name}' contains non-binary values. See log for details."
        )


def _validate_negative(
    table_name: str, data: pd.DataFrame, negative_ok: list[str] = None
) -> None:
    """Verify that the provided data does not contain negative values

    Checks will be performed on all columns unless they are explicitly passed into the
    function as being allowed to have negative values. Note that the negative value
    check will automatically skip any non-numeric columns

    Args:
        table_name: The name of the table. The only purpose of this is to make error
            messages more descriptive
        data: The data to check
        negative_ok (optional): Columns where negative values are allowed

    Raises:
        ValueError: When negative values are encountered in columns where they are
            not allowed.
    """
    # Avoid issues with mutable default parameter values
    if negative_ok is None:
        negative_ok = []

    # Check each column of the input data
    for column in data.columns:

        # Check for negative values except for those columns which are explicitly
        # allowed to be negative
        if column not in negative_ok:
            if pd.api.types.is_numeric_dtype(data[column]) and (data[column] < 0).any():
                # Log the first 5 rows which contain negative values
                logger.debug(
                    (
                        f"'{table_name}' contains negative values in the column "
                        f"'{column}'. Some of the associated rows are:\n"
                        + textwrap.indent(
                            data[data[column] < 0].head(5).to_string(), "\t"
                        )
                    )
                )

                # Raise error and terminate program
                raise ValueError(
                    f"'{table_name}' contains negative values in the column "
                    f"'{column}'. See log for details."
                )


def _validate_null(
    table_name: str, data: pd.DataFrame, null_ok: list[str] = None
) -> None:
    """Verify that the provided data does not contain null values

    Checks will be performed on all columns unless they are explicitly passed into the
    function as being allowed to have null values

    Args:
        table_name: The name of the table. The only purpose of this is to make error
            messages more descriptive
        data: The data to check
        null_ok (optional): Columns where null values are allowed

    Raises:
        ValueError: When null values are encountered in columns where they are
            not allowed.
    """
    # Avoid issues with mutable default parameter values
    if null_ok is None:
        null_ok = []

    # Check each column of the input data
    for column in data.columns:

        # Check for null values except for those columns which are explicitly allowed to
        # have null values
        if column not in null_ok:
            if (data[column].isna()).any():
                # Log the first 5 rows which contain null values
                logger.debug(
                    (
                        f"'{table_name}' contains null values in the column "
                        f"'{column}'. Some of the associated rows are:\n"
                        + textwrap.indent(
                            data[data[column].isna()].head(5).to_string(), "\t"
                        )
                    )
                )

                # Raise error and terminate program
                raise ValueError(
                    f"'{table_name}' contains null values in the column '{column}'. "
                    f"See log for details."
                )
