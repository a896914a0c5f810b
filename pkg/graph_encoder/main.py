import logging
import sys

from graph_encoder.config import Config
from graph_encoder.encoder_app import create_app


def run_cli(argv=None):
    """
    Run the command-line application.

    This function configures logging from Config, creates the app using
    create_app() from the encoder_app module and runs the requested command.

    Returns:
        int: The process exit code.
    """
    logging.basicConfig(level=Config.LOG_LEVEL, format=Config.LOG_FORMAT, stream=sys.stderr)
    app = create_app()
    return app.run(argv)


if __name__ == "__main__":
    sys.exit(run_cli())
