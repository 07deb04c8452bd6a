# Main entry point of the Spike Deblur Toolkit. For runtime instructions, refer to the
# repository README.md. For methodology and other documentation, refer to the wiki
# pages under wiki/

###########
# Imports #
###########

import logging
import sys

import python.cli as cli
import python.utils as utils

logger = logging.getLogger(__name__)


################
# Control flow #
################

# Without a subcommand, greet the user and show the available pipelines
if len(sys.argv) == 1:
    utils.display_ascii_art(utils.DATA_FOLDER / "welcome.txt")
    cli.build_parser().print_help()
    sys.exit(cli.EXIT_OK)

logger.debug(f"Running with arguments {sys.argv[1:]}")
sys.exit(cli.main(sys.argv[1:]))
