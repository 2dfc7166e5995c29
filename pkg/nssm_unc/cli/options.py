import argparse


def common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config", type=str, default=None, help="TOML file merged over the bundled defaults"
    )
    parent.add_argument("--fast", action="store_true", help="use the reduced CI profile")
    parent.add_argument("--seed", type=int, default=None, help="global seed override")
    return parent
