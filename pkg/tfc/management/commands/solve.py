from __future__ import annotations

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from tfc.constants import ALGORITHMS, DEFAULT_ALGORITHM, DEFAULT_LP_ENGINE, DEFAULT_SUPERNODE_SIZE
from tfc.exceptions import TFCError
from tfc.management.base import add_instance_arguments, command_errors, default_seed, read_instance
from tfc.models import SolveRun
from tfc.services.instance_files import instance_fingerprint, save_assignment, save_report
from tfc.services.pipeline import SolverOptions, build_report, run_algorithm
from tfc.services.rng import RNG_ALGORITHM
from tfc.services.schemas import RunConfig, SolveReport

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Resolve uma instância TFC com um algoritmo e grava o relatório JSON."

    def add_arguments(self, parser) -> None:
        add_instance_arguments(parser)
        parser.add_argument("--algorithm", choices=ALGORITHMS, default=DEFAULT_ALGORITHM)
        parser.add_argument("--sparsify", type=float, help="Mantém cada aresta de conflito com esta probabilidade.")
        parser.add_argument("--compact", action="store_true", help="Agrupa os indivíduos em supernós antes da relaxação.")
        parser.add_argument("--supernode-size", dest="supernode_size", type=int, default=DEFAULT_SUPERNODE_SIZE)
        parser.add_argument("--seed", type=int, help="Semente base; a repetição i usa seed + i.")
        parser.add_argument("--repetitions", type=int, default=1)
        parser.add_argument("--engine", choices=["auto", "simplex", "highs"], help="Motor de LP (padrão: TFC_LP_ENGINE).")
        parser.add_argument("--exact-budget", dest="exact_budget", type=int, help="Orçamento de nós do branch-and-bound.")
        parser.add_argument("--output", help="Caminho do relatório. Sem ele o relatório é impresso.")
        parser.add_argument("--save-assignment", dest="save_assignment", help="Grava aqui a melhor atribuição.")
        parser.add_argument("--dump-lp", dest="dump_lp", help="Grava a relaxação no formato texto LP.")
        parser.add_argument("--record", action="store_true", help="Registra a execução no banco.")

    def handle(self, *args, **options) -> None:
        with command_errors():
            config = RunConfig(
                subcommand="solve",
                instance=options["instance"],
                instance_format=options.get("format") or "canonical",
                algorithm=options.get("algorithm") or DEFAULT_ALGORITHM,
                alpha=options.get("alpha"),
                lam=options.get("lam"),
                sparsify=options.get("sparsify"),
                compact=bool(options.get("compact")),
                supernode_size=options.get("supernode_size") or DEFAULT_SUPERNODE_SIZE,
                seed=options["seed"] if options.get("seed") is not None else default_seed(),
                repetitions=options["repetitions"] if options.get("repetitions") is not None else 1,
                engine=options.get("engine") or getattr(settings, "TFC_LP_ENGINE", DEFAULT_LP_ENGINE),
                output=options.get("output"),
            )
            inst = read_instance(options)
            solver = SolverOptions.from_config(
                config,
                exact_budget=options.get("exact_budget"),
                dump_lp=Path(options["dump_lp"]) if options.get("dump_lp") else None,
            )
            try:
                run = run_algorithm(inst, solver)
            except TFCError as exc:
                if options.get("record"):
                    SolveRun.objects.create(
                        algorithm=config.algorithm,
                        instance_path=config.instance or "",
                        instance_fingerprint=instance_fingerprint(inst),
                        seed=config.seed,
                        repetitions=config.repetitions,
                        status=SolveRun.STATUS_FAILED,
                        error=str(exc),
                    )
                raise

            report = build_report(inst, config, run)
            if config.output:
                save_report(report, config.output)
            else:
                self.stdout.write(report.model_dump_json(indent=2, by_alias=True))
            if options.get("save_assignment"):
                echo = config.model_dump(mode="json", by_alias=True)
                echo.update(instance_fingerprint=report.instance.fingerprint, rng=RNG_ALGORITHM)
                save_assignment(inst, run.best.assignment, options["save_assignment"], echo)
            if options.get("record"):
                self._record(report)

        if config.output:
            self._summary(report)

    def _record(self, report: SolveReport) -> None:
        SolveRun.objects.create(
            algorithm=report.algorithm,
            instance_path=report.config.instance or "",
            instance_fingerprint=report.instance.fingerprint,
            seed=report.config.seed,
            repetitions=report.summary.runs,
            objective=report.objective.total,
            task_satisfaction=report.objective.task_satisfaction,
            social_satisfaction=report.objective.social_satisfaction,
            report_json=report.model_dump(mode="json", by_alias=True),
        )

    def _summary(self, report: SolveReport) -> None:
        objective = report.objective
        self.stdout.write(
            f"{report.algorithm}: F={objective.total:.6f} F_R={objective.task_satisfaction:.6f} "
            f"F_G={objective.social_satisfaction:.6f} lambda={objective.lam:.6g}"
        )
        summary = report.summary
        if summary.runs > 1:
            self.stdout.write(
                f"runs={summary.runs} mean={summary.mean:.6f} std={summary.std:.6f} "
                f"se={summary.standard_error:.6f} worst={summary.worst:.6f}"
            )
        if report.relaxation is not None:
            self.stdout.write(
                f"relaxation {report.relaxation.kind}={report.relaxation.value:.6f} "
                f"({report.relaxation.engine}, {report.relaxation.iterations} iterações)"
            )
        if summary.guarantee is not None:
            self.stdout.write(f"garantia {summary.guarantee_factor:g} x relaxação = {summary.guarantee:.6f}")
        if report.approximation is not None and report.approximation.value is not None:
            ratio = report.approximation
            self.stdout.write(f"razão de aproximação {ratio.qualifier} {ratio.value:.6f} ({ratio.mode})")
        if not report.balancing.sufficient:
            self.stdout.write(report.balancing.note)
        self.stdout.write(f"relatório gravado em {report.config.output}")
