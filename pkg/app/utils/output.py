"""
Result-table writer: CSV with a `#` metadata block, plus gnuplot companions
"""
import csv
import hashlib
import logging
import math
import os

from app.utils.json_encoder import canonical_json

logger = logging.getLogger(__name__)


def config_hash(document):
    """sha256 of the canonical JSON of a validated config"""
    return hashlib.sha256(canonical_json(document).encode('utf-8')).hexdigest()


def _format(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, 'dtype'):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def metadata_lines(table):
    lines = [f"# command: {table.command}"]
    for key in ('config_hash', 'tool_version', 'seed'):
        lines.append(f"# {key}: {table.metadata.get(key, '')}")
    for key in sorted(k for k in table.metadata if k not in ('config_hash', 'tool_version', 'seed')):
        lines.append(f"# {key}: {table.metadata[key]}")
    lines.append("# units: " + ",".join(unit or "-" for unit in table.units))
    return lines


def write_table(table, out_dir, name=None):
    """
    Write table as <out_dir>/<name>.csv and return the path.

    Parameters:
    - table: ResultTable whose metadata carries config_hash, tool_version and seed
    - out_dir: created if missing
    - name: file stem, defaults to the command name
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name or table.command}.csv")
    with open(path, 'w', newline='') as handle:
        for line in metadata_lines(table):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format(value) for value in row])
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path


def _parse(value):
    try:
        return float(value)
    except ValueError:
        return value


def read_table(path):
    """(metadata, columns, rows) from a file written by write_table; numeric cells come back as floats"""
    metadata = {}
    with open(path, newline='') as handle:
        lines = handle.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            metadata[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [tuple(_parse(value) for value in row) for row in reader]
    return metadata, columns, rows


def _script_header(table, title):
    return [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        f"set title '{title or table.command}'",
    ]


def _save_script(out_dir, stem, lines):
    path = os.path.join(out_dir, f"{stem}.gp")
    with open(path, 'w') as handle:
        handle.write("\n".join(lines + [""]))
    return path


def write_plot_script(table, out_dir, x, ys, name=None, title=None, style="linespoints"):
    """gnuplot script plotting columns ys against x from the table's CSV"""
    stem = name or table.command
    x_index = table.columns.index(x) + 1
    plots = [
        f"'{stem}.csv' every ::1 using {x_index}:{table.columns.index(y) + 1} with {style} title '{y}'"
        for y in ys
    ]
    lines = _script_header(table, title) + [f"set xlabel '{x}'", "plot " + ", \\\n     ".join(plots)]
    return _save_script(out_dir, stem, lines)


def write_map_script(table, out_dir, x, y, z, name=None, title=None):
    """gnuplot heat map of column z over the (x, y) grid"""
    stem = name or table.command
    index = [table.columns.index(c) + 1 for c in (x, y, z)]
    lines = _script_header(table, title) + [
        "set view map",
        "set pm3d at b",
        "set dgrid3d",
        f"set xlabel '{x}'",
        f"set ylabel '{y}'",
        f"splot '{stem}.csv' every ::1 using {index[0]}:{index[1]}:{index[2]} with pm3d title '{z}'",
    ]
    return _save_script(out_dir, stem, lines)
