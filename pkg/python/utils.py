import logging
import pathlib
import tomllib

import numpy as np

import python.parsers as parsers


#########
# PATHS #
#########

# Store project root folder
ROOT_FOLDER = pathlib.Path(__file__).parent.resolve().parent
DATA_FOLDER = ROOT_FOLDER / "data"

###########
# LOGGING #
###########

# Create a console handler
_console_handler = logging.StreamHandler()
_console_handler.setLevel(logging.INFO)

# Create a file handler
_file_handler = logging.FileHandler(
    filename=ROOT_FOLDER / "log.txt", mode="w", encoding="utf-8"
)
_file_handler.setLevel(logging.DEBUG)

# Set up root logger
logging.basicConfig(
    level=logging.DEBUG,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
    handlers=[_console_handler, _file_handler],
)

# Create logger for this module
logger = logging.getLogger(__name__)
logger.debug("Initialize log file")


#########################
# RUNTIME CONFIGURATION #
#########################

# Load configuration TOML file
try:
    with open(ROOT_FOLDER / "config.toml", "rb") as file:
        config = tomllib.load(file)
except IOError:
    raise IOError("config.toml does not exist, see README.md")

# Initialize input parser
# Parse the configuration TOML file and validate its contents
input_parser = parsers.InputParser(config=config)
input_parser.parse_config()

# Get data from the parsed and validated configuration file
RANDOM_SEED = input_parser.seed
SPIKE = input_parser.spike
RECONSTRUCTION = input_parser.reconstruction
TFS = input_parser.tfs
EVENTS = input_parser.events
DEBLUR = input_parser.deblur
METRICS = input_parser.metrics

logger.debug(f"RANDOM_SEED: {RANDOM_SEED}")
logger.debug(f"SPIKE: {SPIKE}")
logger.debug(f"RECONSTRUCTION: {RECONSTRUCTION}")
logger.debug(f"TFS: {TFS}")
logger.debug(f"EVENTS: {EVENTS}")
logger.debug(f"DEBLUR: {DEBLUR}")
logger.debug(f"METRICS: {METRICS}")


##############################
# UTILITY LISTS AND MAPPINGS #
##############################

# Standard luminance weighting used by earlier event-based methods, in R, G, B order
STANDARD_GRAY_WEIGHTS = (0.2989, 0.5870, 0.1140)

# Resolution of the Vidar spike camera as (width, height). Container round-trip
# tests go up to this size
VIDAR_RESOLUTION = (400, 250)

# Number of sharp sub-exposures averaged into one blurry training image
BURST_LENGTH = 18


#####################
# UTILITY FUNCTIONS #
#####################


def display_ascii_art(filename: str | pathlib.Path) -> None:
    """Displays ASCII art from a text file."""
    try:
        with open(filename, "r") as file:
            for line in file:
                print(line, end="")
            print()  # Ensure a newline after the ASCII art
    except FileNotFoundError:
        print(f"Error: File '{filename}' not found.")


def project_to_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex

    The result is the closest vector (in the L2 sense) whose entries are non-negative
    and sum to one. Uses the sort-and-threshold algorithm, which is exact and runs in
    O(n log n)

    Args:
        values: A 1-dimensional array of finite values

    Returns:
        The projected vector, same length as the input

    Raises:
        ValueError: If the input is not a finite 1-dimensional array
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("Input parameter 'values' must be a non-empty 1-d array")
    if not np.all(np.isfinite(values)):
        raise ValueError("Input parameter 'values' contains non-finite values")

    # Find the largest index where the sorted, shifted values stay positive
    ordered = np.sort(values)[::-1]
    cumulative = np.cumsum(ordered) - 1
    index = np.arange(1, values.size + 1)
    rho = np.nonzero(ordered - cumulative / index > 0)[0][-1]
    threshold = cumulative[rho] / (rho + 1)

    return np.maximum(values - threshold, 0)


def evenly_spaced_indices(count: int, n: int) -> np.ndarray:
    """Pick 'n' indices out of range(count), spread evenly and centered

    Index i of the output is floor((i + 0.5) * count / n). A single pick lands on the
    middle element, and n == count returns every index

    Args:
        count: The number of elements to choose from
        n: The number of elements to choose. Clipped to 'count'

    Returns:
        Sorted, unique integer indices
    """
    if count < 1 or n < 1:
        raise ValueError(f"Both 'count' ({count}) and 'n' ({n}) must be positive")
    n = min(n, count)
    return np.floor((np.arange(n) + 0.5) * count / n).astype(int)
