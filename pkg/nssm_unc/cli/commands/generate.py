import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "generate", parents=parents, help="write the training set, test sets 1-4 and the G1/G2 Bode tables"
    )
    parser.set_defaults(stage="generate", handler=PipelineService.cmd_generate)
