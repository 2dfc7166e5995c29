import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "report", parents=parents, help="summary table of measured and published metrics"
    )
    parser.set_defaults(stage="report", handler=PipelineService.cmd_report)
