import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "plot", parents=parents, help="PNG figures from the generated and evaluated artifacts"
    )
    parser.set_defaults(stage="plot", handler=PipelineService.cmd_plot)
