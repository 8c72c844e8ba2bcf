from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd
from django.core.management.base import BaseCommand

from tfc.management.base import add_instance_arguments, command_errors, read_instance, usage_error
from tfc.services.exact import solve_exact
from tfc.services.instance_files import atomic_write_text, load_assignment, load_groups, load_rankings
from tfc.services.metrics import approximation_ratio, average_gap, changed_fraction, quality_metrics
from tfc.services.model import evaluate_F
from tfc.services.pipeline import instance_info
from tfc.services.schemas import EvaluateEntry, EvaluateReport, ObjectiveModel

logger = logging.getLogger(__name__)


def _column_names(paths: list[str]) -> list[str]:
    if len(set(paths)) == len(paths):
        return list(paths)
    return [f"{path}#{i + 1}" for i, path in enumerate(paths)]


class Command(BaseCommand):
    help = "Avalia um ou mais arquivos de atribuição lado a lado (objetivo, métricas de qualidade, razões)."

    def add_arguments(self, parser) -> None:
        add_instance_arguments(parser)
        parser.add_argument("assignments", nargs="+", help="Arquivos de atribuição, reportados nesta ordem.")
        parser.add_argument("--rankings", help="Diretório education com rankings.csv / friends.csv.")
        parser.add_argument("--groups", help="Rótulos de grupo para o gap médio.")
        parser.add_argument("--initial", help="Atribuição inicial para a fração alterada.")
        parser.add_argument("--reference", choices=["none", "exact"], default="none")
        parser.add_argument("--exact-budget", dest="exact_budget", type=int)
        parser.add_argument("--output", help="Caminho do relatório JSON.")

    def handle(self, *args, **options) -> None:
        if options.get("alpha") is not None and options.get("lam") is not None:
            raise usage_error("Informe --alpha ou --lambda, não ambos.")
        if options.get("initial") and not options.get("groups"):
            raise usage_error("--initial exige --groups.")
        paths = [str(p) for p in options["assignments"]]

        with command_errors():
            inst = read_instance(options)
            rankings_dir = options.get("rankings")
            if rankings_dir is None and options.get("format") == "education":
                rankings_dir = options["instance"]
            rankings = load_rankings(rankings_dir) if rankings_dir else None
            groups = load_groups(inst, options["groups"]) if options.get("groups") else None
            initial = load_assignment(inst, options["initial"]) if options.get("initial") else None
            optimum = solve_exact(inst, options.get("exact_budget")).value if options.get("reference") == "exact" else None

            entries: list[EvaluateEntry] = []
            for name, path in zip(_column_names(paths), paths):
                x = load_assignment(inst, path)
                breakdown = evaluate_F(inst, x)
                diversity = None
                if groups is not None:
                    diversity = {"average_gap": average_gap(inst, groups, x)}
                    if initial is not None:
                        diversity["changed_fraction"] = changed_fraction(initial, x)
                entries.append(
                    EvaluateEntry(
                        name=name,
                        objective=ObjectiveModel(
                            task_satisfaction=breakdown.task_satisfaction,
                            social_satisfaction=breakdown.social_satisfaction,
                            lam=breakdown.lam,
                            total=breakdown.total,
                        ),
                        quality=quality_metrics(inst, rankings, x).to_model() if rankings else None,
                        approximation=approximation_ratio(inst, x, optimum, "exact").to_model() if optimum is not None else None,
                        diversity=diversity,
                    )
                )

            report = EvaluateReport(
                config={
                    "subcommand": "evaluate",
                    "instance": options["instance"],
                    "instance_format": options.get("format") or "canonical",
                    "assignments": paths,
                    "alpha": options.get("alpha"),
                    "lambda": options.get("lam"),
                    "rankings": rankings_dir,
                    "groups": options.get("groups"),
                    "initial": options.get("initial"),
                    "reference": options.get("reference") or "none",
                },
                instance=instance_info(inst, options["instance"]),
                entries=entries,
            )
            if options.get("output"):
                atomic_write_text(Path(options["output"]), report.model_dump_json(indent=2, by_alias=True) + "\n")

        self.stdout.write(side_by_side(report).to_string())


def side_by_side(report: EvaluateReport) -> pd.DataFrame:
    """One column per assignment, rows are metrics; column order follows the input order."""
    columns = {}
    order: list[str] = []
    for entry in report.entries:
        row = {
            "F": entry.objective.total,
            "F_R": entry.objective.task_satisfaction,
            "F_G": entry.objective.social_satisfaction,
        }
        if entry.quality is not None:
            row.update(entry.quality.model_dump())
        if entry.approximation is not None:
            row["approximation_ratio"] = entry.approximation.value
        if entry.diversity:
            row.update(entry.diversity)
        columns[entry.name] = row
        order.extend(key for key in row if key not in order)
    return pd.DataFrame(columns).reindex(order)
