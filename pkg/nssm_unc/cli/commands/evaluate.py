import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "evaluate", parents=parents, help="predictions with credible intervals and metrics per test signal"
    )
    parser.set_defaults(stage="evaluate", handler=PipelineService.cmd_evaluate)
