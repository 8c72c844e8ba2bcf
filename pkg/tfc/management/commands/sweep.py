from __future__ import annotations

import logging

from django.conf import settings
from django.core.management.base import BaseCommand

from tfc.constants import DEFAULT_LP_ENGINE, DEFAULT_SUPERNODE_SIZE, SWEEP_SCHEMA
from tfc.management.base import (
    add_instance_arguments,
    command_errors,
    default_seed,
    parse_list,
    read_instance,
    usage_error,
)
from tfc.services.instance_files import config_comment, load_assignment, load_groups, write_table
from tfc.services.metrics import alpha_sweep, company_sweep, sweep_table
from tfc.services.pipeline import SolverOptions
from tfc.services.schemas import RunConfig

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = "0,0.5,1,2,10"
DEFAULT_SWEEP_ALGORITHMS = "exact,rpipage-l2"


class Command(BaseCommand):
    help = "Resolve a instância numa grade de fatores de balanceamento e grava a tabela de trade-off (CSV)."

    def add_arguments(self, parser) -> None:
        add_instance_arguments(parser, with_weights=False)
        parser.add_argument("--alphas", default=DEFAULT_ALPHAS, help=f"Grade de alphas separada por vírgula (padrão: {DEFAULT_ALPHAS}).")
        parser.add_argument("--algorithms", default=DEFAULT_SWEEP_ALGORITHMS, help="Algoritmos separados por vírgula.")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--repetitions", type=int, default=1)
        parser.add_argument("--engine", choices=["auto", "simplex", "highs"])
        parser.add_argument("--sparsify", type=float)
        parser.add_argument("--compact", action="store_true")
        parser.add_argument("--supernode-size", dest="supernode_size", type=int, default=DEFAULT_SUPERNODE_SIZE)
        parser.add_argument("--exact-budget", dest="exact_budget", type=int)
        parser.add_argument("--output", required=True, help="Tabela CSV a gravar.")
        parser.add_argument("--groups", help="Rótulos de grupo; com --initial grava também a tabela company.")
        parser.add_argument("--initial", help="Atribuição inicial (o estado anterior).")
        parser.add_argument("--company-output", dest="company_output", help="CSV com fração alterada / gap médio.")

    def handle(self, *args, **options) -> None:
        alphas = parse_list(options.get("alphas") or DEFAULT_ALPHAS, float, what="alphas")
        algorithms = parse_list(options.get("algorithms") or DEFAULT_SWEEP_ALGORITHMS, what="algoritmos")
        company = [options.get(name) for name in ("groups", "initial", "company_output")]
        if any(company) and not all(company):
            raise usage_error("--groups, --initial e --company-output devem ser informados juntos.")

        with command_errors():
            configs = [
                RunConfig(
                    subcommand="sweep",
                    instance=options["instance"],
                    instance_format=options.get("format") or "canonical",
                    algorithm=algorithm,
                    sparsify=options.get("sparsify"),
                    compact=bool(options.get("compact")),
                    supernode_size=options.get("supernode_size") or DEFAULT_SUPERNODE_SIZE,
                    seed=options["seed"] if options.get("seed") is not None else default_seed(),
                    repetitions=options["repetitions"] if options.get("repetitions") is not None else 1,
                    engine=options.get("engine") or getattr(settings, "TFC_LP_ENGINE", DEFAULT_LP_ENGINE),
                    output=options["output"],
                )
                for algorithm in algorithms
            ]
            if any(alpha < 0 for alpha in alphas):
                raise usage_error("Os valores de alpha devem ser não negativos.")
            echo = configs[0].model_dump(by_alias=True, exclude={"algorithm", "alpha", "lam"})
            echo.update(alphas=sorted(alphas), algorithms=algorithms)
            header = [SWEEP_SCHEMA, config_comment(echo)]

            inst = read_instance(options)
            solver = SolverOptions.from_config(configs[0], exact_budget=options.get("exact_budget"))
            points = alpha_sweep(inst, alphas, algorithms, solver)
            write_table(sweep_table(points), options["output"], header)

            if options.get("company_output"):
                groups = load_groups(inst, options["groups"])
                initial = load_assignment(inst, options["initial"])
                table = company_sweep(inst, groups, initial, alphas, solver)
                write_table(table, options["company_output"], header)

        failed = sum(point.status != "ok" for point in points)
        self.stdout.write(
            f"sweep: alphas={len(alphas)} algorithms={len(algorithms)} rows={len(points)} failed={failed} "
            f"-> {options['output']}"
        )
        for point in points:
            if point.status != "ok":
                self.stdout.write(f"- alpha={point.alpha:g} {point.algorithm}: {point.error}")
