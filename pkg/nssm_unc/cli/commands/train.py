import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "train", parents=parents, help="MAP estimation with Adam then full-batch refinement"
    )
    parser.set_defaults(stage="train", handler=PipelineService.cmd_train)
