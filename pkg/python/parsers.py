import cerberus

_COMBINE_MODES = ["mean", "sum"]
_TARGET_MODES = ["both", "tfi", "tfp", "spikes"]
_INIT_MODES = ["zero", "random"]


class InputParser:
    """A class to parse and validate input configurations.

    The final result of creating a class instance and running the 'parse_config()'
    function is one dictionary per configuration section, each holding validated
    values with the correct Python types:
    * (Class variable 'seed') The seed used for every random draw of a run
    * (Class variable 'spike') Spike camera simulation settings
    * (Class variable 'reconstruction') TFI/TFP reconstruction settings
    * (Class variable 'tfs') Texture from Spike loss settings
    * (Class variable 'events') Event camera simulation settings
    * (Class variable 'deblur') Desk-scale deblurring settings
    * (Class variable 'metrics') Image quality metric settings

    Attributes:
        _config (dict): The configuration dictionary to be parsed.
        seed (int): The seed for deterministic random number generation
        spike (dict): Keys 'omega', 'sample_rate_hz', 'init'
        reconstruction (dict): Keys 'tfp_window'
        tfs (dict): Keys 'weight_w', 'recon_per_view_n', 'combine_mode',
            'target_mode'
        events (dict): Keys 'theta', 'log_intensity', 'log_eps'
        deblur (dict): Keys 'image_size', 'trajectory_length', 'margin',
            'samples_per_shift', 'iterations', 'step'
        metrics (dict): Keys 'max_value', 'ssim_window', 'k1', 'k2'

    Methods:
        parse_config(): Control function
        _validate_config(): Validate the configuration file
        _validate_cross_fields(): Validate relationships between sections
    """

    def __init__(self, config: dict) -> None:
        """Initialize the InputParser with a configuration dictionary."""
        self._config = config
        self.seed = None
        self.spike = {}
        self.reconstruction = {}
        self.tfs = {}
        self.events = {}
        self.deblur = {}
        self.metrics = {}

    def parse_config(self) -> None:
        """Control flow to parse the runtime configuration

        First, the contents of the config file are validated key by key. Then the
        relationships between sections are checked. Finally, each section is copied
        into its own class variable with floats coerced, since TOML lets users write
        '2' where '2.0' is meant

        Returns:
            None
        """
        self._validate_config()
        self._validate_cross_fields()

        self.seed = self._config["run"]["seed"]
        self.spike = {
            "omega": float(self._config["spike"]["omega"]),
            "sample_rate_hz": float(self._config["spike"]["sample_rate_hz"]),
            "init": self._config["spike"]["init"],
        }
        self.reconstruction = dict(self._config["reconstruction"])
        self.tfs = dict(self._config["tfs"])
        self.tfs["weight_w"] = float(self.tfs["weight_w"])
        self.events = dict(self._config["events"])
        self.events["theta"] = float(self.events["theta"])
        self.events["log_eps"] = float(self.events["log_eps"])
        self.deblur = dict(self._config["deblur"])
        self.deblur["step"] = float(self.deblur["step"])
        self.metrics = dict(self._config["metrics"])
        for key in ["max_value", "k1", "k2"]:
            self.metrics[key] = float(self.metrics[key])

    def _validate_config(self) -> None:
        """Validate the contents of the configuration dictionary

        Raises:
            ValueError: If any of the configuration values are invalid.
        """
        # Check all keys are present and key types using Cerberus. For help, see their
        # website here: https://docs.python-cerberus.org/usage.html
        number = ["integer", "float"]
        schema = {
            "run": {
                "type": "dict",
                "schema": {
                    "seed": {"type": "integer", "min": 0},
                },
            },
            "spike": {
                "type": "dict",
                "schema": {
                    "omega": {"type": number, "min": 1e-12},
                    "sample_rate_hz": {"type": number, "min": 1e-12},
                    "init": {"type": "string", "allowed": _INIT_MODES},
                },
            },
            "reconstruction": {
                "type": "dict",
                "schema": {
                    "tfp_window": {"type": "integer", "min": 1},
                },
            },
            "tfs": {
                "type": "dict",
                "schema": {
                    "weight_w": {"type": number, "min": 0},
                    "recon_per_view_n": {"type": "integer", "min": 1},
                    "combine_mode": {"type": "string", "allowed": _COMBINE_MODES},
                    "target_mode": {"type": "string", "allowed": _TARGET_MODES},
                },
            },
            "events": {
                "type": "dict",
                "schema": {
                    "theta": {"type": number, "min": 1e-12},
                    "log_intensity": {"type": "boolean"},
                    "log_eps": {"type": number, "min": 1e-12},
                },
            },
            "deblur": {
                "type": "dict",
                "schema": {
                    "image_size": {"type": "integer", "min": 8},
                    "trajectory_length": {"type": "integer", "min": 2},
                    "margin": {"type": "integer", "min": 0},
                    "samples_per_shift": {"type": "integer", "min": 1},
                    "iterations": {"type": "integer", "min": 1},
                    "step": {"type": number, "min": 1e-12},
                },
            },
            "metrics": {
                "type": "dict",
                "schema": {
                    "max_value": {"type": number, "min": 1e-12},
                    "ssim_window": {"type": "integer", "min": 1},
                    "k1": {"type": number, "min": 0},
                    "k2": {"type": number, "min": 0},
                },
            },
        }
        validator = cerberus.Validator(schema, require_all=True)
        if not validator.validate(self._config):
            raise ValueError(validator.errors)

    def _validate_cross_fields(self) -> None:
        """Validate settings which depend on more than one key

        Raises:
            ValueError: If any of the configuration values are inconsistent.
        """
        # Each TFP target must only see spikes from its own sub-exposure
        if (
            self._config["reconstruction"]["tfp_window"]
            > self._config["deblur"]["samples_per_shift"]
        ):
            raise ValueError(
                "Key 'tfp_window' in 'reconstruction' settings cannot be greater than "
                "key 'samples_per_shift' in 'deblur' settings"
            )

        # Spike targets are picked among the sub-exposures of one blurry view
        if (
            self._config["tfs"]["recon_per_view_n"]
            > self._config["deblur"]["trajectory_length"]
        ):
            raise ValueError(
                "Key 'recon_per_view_n' in 'tfs' settings cannot be greater than key "
                "'trajectory_length' in 'deblur' settings"
            )

        # The shake margin is cropped from both sides of the scene
        if 2 * self._config["deblur"]["margin"] >= self._config["deblur"]["image_size"]:
            raise ValueError(
                f"Key 'margin' in 'deblur' settings must be less than half of "
                f"'image_size' ({self._config['deblur']['image_size']})"
            )

        # Every image used for SSIM must hold at least one full window
        if (
            self._config["metrics"]["ssim_window"]
            > self._config["deblur"]["image_size"]
        ):
            raise ValueError(
                "Key 'ssim_window' in 'metrics' settings cannot be greater than key "
                "'image_size' in 'deblur' settings"
            )
