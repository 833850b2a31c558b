import threading

try:
    from rich.console import Console, Group
    from rich.live import Live
    from rich.panel import Panel
    from rich.progress import Progress, SpinnerColumn, TimeElapsedColumn
    from rich.table import Table
except ImportError:
    raise ImportError("rich is not installed.\n" "pip install whsplit[applications]")

from whsplit.benchmark import MARKDOWN_ROWS, run_monte_carlo, run_population_sweep
from whsplit.io import write_report


class BenchmarkRunner:
    class UserInterface:
        def __init__(self):
            self.main_progress = Progress(
                SpinnerColumn(), *Progress.get_default_columns(), TimeElapsedColumn()
            )
            self.sub_progress = Progress(
                SpinnerColumn(), *Progress.get_default_columns(), TimeElapsedColumn()
            )

        def generate(self):
            return Panel(Group(self.main_progress, self.sub_progress))

    def __init__(
        self,
        config,
        output,
        markdown=False,
        jobs=1,
        sweep_order=None,
        sweep_populations=None,
    ):
        self.config = config
        self.output = output
        self.markdown = markdown
        self.jobs = jobs
        self.sweep_order = sweep_order
        self.sweep_populations = sweep_populations
        self.ui = BenchmarkRunner.UserInterface()
        self.lock = threading.Lock()

    def run(self):
        with Live(self.ui.generate()):
            if self.sweep_populations:
                report = self.run_sweep()
            else:
                report = self.run_orders()

        paths = write_report(self.output, report, self.markdown)
        Console().print(self.summary_table(report))
        return report, paths

    def run_orders(self):
        config = self.config
        total = len(config.orders) * config.trials_per_order
        main_task = self.ui.main_progress.add_task("Monte Carlo trials", total=total)
        order_tasks = {
            o: self.ui.sub_progress.add_task(
                f"Order {o} (population {config.population_size(o)})",
                total=config.trials_per_order,
            )
            for o in config.orders
        }

        def progress(record):
            with self.lock:
                self.ui.main_progress.update(main_task, advance=1)
                self.ui.sub_progress.update(order_tasks[record.order], advance=1)

        return run_monte_carlo(config, jobs=self.jobs, progress=progress)

    def run_sweep(self):
        config = self.config
        sizes = self.sweep_populations
        main_task = self.ui.main_progress.add_task(
            f"Population sweep at order {self.sweep_order}",
            total=len(sizes) * config.trials_per_order,
        )
        size_tasks = {
            p: self.ui.sub_progress.add_task(f"Population {p}", total=config.trials_per_order)
            for p in sizes
        }

        def progress(record):
            with self.lock:
                self.ui.main_progress.update(main_task, advance=1)
                self.ui.sub_progress.update(size_tasks[record.population_size], advance=1)

        return run_population_sweep(
            config, self.sweep_order, sizes, jobs=self.jobs, progress=progress
        )

    @classmethod
    def summary_table(cls, report):
        table = Table(title="Brute force scan vs genetic algorithm")
        table.add_column(MARKDOWN_ROWS[0][0])

        for row in report.rows:
            table.add_column(str(row.order), justify="right")

        for label, attr, fmt in MARKDOWN_ROWS[1:]:
            cells = []

            for row in report.rows:
                value = getattr(row, attr)
                cells.append("n/a" if value != value else fmt.format(value))

            table.add_row(label, *cells)

        return table
