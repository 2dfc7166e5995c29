import argparse

from nssm_unc.pipeline.services import PipelineService


def register(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    parents: list[argparse.ArgumentParser],
) -> None:
    parser = subparsers.add_parser(
        "laplace", parents=parents, help="Gauss-Newton Laplace posterior at the trained parameters"
    )
    parser.set_defaults(stage="laplace", handler=PipelineService.cmd_laplace)
