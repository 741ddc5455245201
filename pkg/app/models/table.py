from dataclasses import dataclass, field


@dataclass
class ResultTable:
    """Rows of numbers with column names, units and a run-metadata header"""

    command: str
    columns: list
    units: list = None
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        if self.units is None:
            self.units = [""] * len(self.columns)
        if len(self.units) != len(self.columns):
            raise ValueError("one unit annotation per column")

    def add_row(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table {self.command!r} has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name):
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def __len__(self):
        return len(self.rows)
