from __future__ import annotations

import logging

from django.core.management.base import BaseCommand

from tfc.management.base import command_errors, default_seed, usage_error
from tfc.services.generators import GENERATORS, PreferenceFunction
from tfc.services.instance_files import save_assignment, save_education, save_groups, save_instance
from tfc.services.rng import RNG_ALGORITHM

logger = logging.getLogger(__name__)

# generator keyword -> command option (dest), per dataset kind
KIND_OPTIONS = {
    "synth-tf": ("blocks", "block_size", "n_tasks", "p_in", "p_out", "capacity_slack", "alpha"),
    "company": ("department_size", "switch_probability", "alpha"),
    "education": ("students", "projects", "group_size", "p_in", "p_out", "shuffles", "alpha", "preference"),
}


class Command(BaseCommand):
    help = "Gera uma instância TFC sintética (synth-tf, company ou education) no formato canonical."

    def add_arguments(self, parser) -> None:
        parser.add_argument("kind", choices=sorted(GENERATORS))
        parser.add_argument("--output", required=True, help="Arquivo de instância canonical a gravar.")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--alpha", type=float)
        # synth-tf
        parser.add_argument("--blocks", type=int)
        parser.add_argument("--block-size", dest="block_size", type=int)
        parser.add_argument("--tasks", dest="n_tasks", type=int)
        parser.add_argument("--p-in", dest="p_in", type=float)
        parser.add_argument("--p-out", dest="p_out", type=float)
        parser.add_argument("--capacity-slack", dest="capacity_slack", type=float)
        # company
        parser.add_argument("--department-size", dest="department_size", type=int)
        parser.add_argument("--switch-probability", dest="switch_probability", type=float)
        parser.add_argument("--groups", help="company: grava aqui o gênero de cada funcionário.")
        parser.add_argument("--initial-assignment", dest="initial_assignment", help="company: grava aqui os departamentos de origem.")
        # education
        parser.add_argument("--students", type=int)
        parser.add_argument("--projects", type=int)
        parser.add_argument("--group-size", dest="group_size", type=int)
        parser.add_argument("--shuffles", type=int)
        parser.add_argument("--preference", choices=[p.value for p in PreferenceFunction])
        parser.add_argument("--education-dir", dest="education_dir", help="education: grava também o diretório de CSVs.")

    def handle(self, *args, **options) -> None:
        kind = options["kind"]
        seed = options["seed"] if options.get("seed") is not None else default_seed()
        params = {name: options[name] for name in KIND_OPTIONS[kind] if options.get(name) is not None}
        if (options.get("groups") or options.get("initial_assignment")) and kind != "company":
            raise usage_error("--groups e --initial-assignment valem apenas para instâncias company.")
        if options.get("education_dir") and kind != "education":
            raise usage_error("--education-dir vale apenas para instâncias education.")

        with command_errors():
            dataset = GENERATORS[kind](seed, **params)
            inst = dataset.instance
            echo = {"subcommand": "generate", "generator": kind, "seed": seed, "params": params, "rng": RNG_ALGORITHM}
            save_instance(inst, options["output"], echo)
            if options.get("groups"):
                save_groups(inst, dataset.groups, options["groups"], echo)
            if options.get("initial_assignment"):
                save_assignment(inst, dataset.initial, options["initial_assignment"], echo)
            if options.get("education_dir"):
                save_education(options["education_dir"], dataset.rankings, inst.capacity_map(), echo)

        self.stdout.write(
            f"{kind} seed={seed}: nodes={inst.n_nodes} tasks={inst.n_tasks} edges={inst.n_edges} "
            f"lambda={inst.lam:.6g} -> {options['output']}"
        )
