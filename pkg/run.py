#!/usr/bin/env python
"""
Run script for the generative prior lab.
This script starts the lab API server and prints the available tools.
"""
import argparse
import logging
import os
import sys

# Add the project root to the path so the package imports without installation
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from genprior import config  # noqa: E402


def check_environment():
    """Warn when required numerical packages are missing."""
    from genprior.system_info import format_system_info, get_system_info

    info = get_system_info()
    print(format_system_info(info))
    missing = [name for name, version in info["packages"].items() if version == "not installed"]
    if missing:
        print(f"Warning: missing packages: {', '.join(missing)}")
        print("Install them with 'pip install -r requirements.txt'.")


def main():
    """Main function to run the lab server."""
    parser = argparse.ArgumentParser(description="Start the generative prior lab API.")
    parser.add_argument("--host", default=config.LAB_HOST)
    parser.add_argument("--port", type=int, default=config.LAB_PORT)
    parser.add_argument("--debug", action="store_true")
    args = parser.parse_args()

    print("Generative Prior Lab")
    print("====================")
    check_environment()
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    from genprior.app import serve
    from genprior.tools import TOOLS

    print("Tools:")
    for tool in TOOLS:
        print(f"  {tool['function']['name']}: {tool['function']['description']}")
    print(f"\nServing on http://{args.host}:{args.port} (Ctrl+C to stop)")
    try:
        serve(args.host, args.port, debug=args.debug)
    except KeyboardInterrupt:
        pass
    print("Server stopped.")


if __name__ == "__main__":
    main()
