"""
Pieces shared by the tfc management commands: instance flags and the
mapping from toolkit errors to process exit codes.

    0  success
    1  generic failure
    2  usage error (bad or conflicting flags)
    3  LP iteration limit
    4  invalid or infeasible input
    5  exact solver budget exceeded
"""
from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Iterator

from django.conf import settings
from django.core.management.base import CommandError
from pydantic import ValidationError

from tfc.constants import DEFAULT_SEED
from tfc.exceptions import (
    BudgetExceeded,
    DimensionError,
    InfeasibleSolutionError,
    InstanceError,
    IterationLimitError,
    SchemaError,
    TFCError,
)
from tfc.services.generators import PreferenceFunction
from tfc.services.instance_files import load_instance
from tfc.services.model import Instance

logger = logging.getLogger(__name__)

EXIT_GENERIC = 1
EXIT_USAGE = 2
EXIT_ITERATION_LIMIT = 3
EXIT_INVALID_INPUT = 4
EXIT_BUDGET_EXCEEDED = 5


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    where = ".".join(str(part) for part in error.get("loc", ()))
    message = str(error.get("msg", exc))
    return f"{where}: {message}" if where else message


@contextmanager
def command_errors() -> Iterator[None]:
    try:
        yield
    except ValidationError as exc:
        raise CommandError(f"Opções inválidas: {_first_error(exc)}", returncode=EXIT_USAGE) from exc
    except IterationLimitError as exc:
        raise CommandError(f"Limite de iterações do LP: {exc}", returncode=EXIT_ITERATION_LIMIT) from exc
    except BudgetExceeded as exc:
        raise CommandError(
            f"{exc} Melhor F encontrado={exc.value:.6f}, limite superior certificado {exc.bound:.6f}.",
            returncode=EXIT_BUDGET_EXCEEDED,
        ) from exc
    except (InstanceError, InfeasibleSolutionError, SchemaError, DimensionError) as exc:
        raise CommandError(f"Entrada inválida: {exc}", returncode=EXIT_INVALID_INPUT) from exc
    except TFCError as exc:
        raise CommandError(str(exc), returncode=EXIT_GENERIC) from exc


def usage_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_USAGE)


def default_seed() -> int:
    return int(getattr(settings, "TFC_DEFAULT_SEED", DEFAULT_SEED))


def parse_list(raw: str, convert=str, *, what: str) -> list:
    items = [item.strip() for item in raw.split(",") if item.strip()]
    if not items:
        raise usage_error(f"Lista de {what} vazia.")
    try:
        return [convert(item) for item in items]
    except ValueError as exc:
        raise usage_error(f"Lista de {what} inválida {raw!r}: {exc}") from exc


def add_instance_arguments(parser, *, with_weights: bool = True) -> None:
    parser.add_argument("--instance", required=True, help="Arquivo de instância (canonical) ou diretório education.")
    parser.add_argument(
        "--format",
        dest="format",
        choices=["canonical", "education"],
        default="canonical",
        help="Formato da instância (padrão: canonical).",
    )
    parser.add_argument(
        "--preference",
        choices=[p.value for p in PreferenceFunction],
        default=PreferenceFunction.INVERSE.value,
        help="Função rank -> satisfação para diretórios education.",
    )
    if with_weights:
        parser.add_argument("--alpha", type=float, help="Fator de balanceamento; lambda = alpha * w(E) / |V|.")
        parser.add_argument("--lambda", dest="lam", type=float, help="Lambda explícito (exclui --alpha).")


def read_instance(options: dict) -> Instance:
    return load_instance(
        options["instance"],
        options.get("format") or "canonical",
        preference=options.get("preference") or PreferenceFunction.INVERSE,
        alpha=options.get("alpha"),
        lam=options.get("lam"),
    )
