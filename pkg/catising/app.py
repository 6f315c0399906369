import sys
from dataclasses import replace
from pathlib import Path

from PySide6.QtCore import QCommandLineOption, QCommandLineParser, QCoreApplication

from catising import __version__
from catising.errors import CatIsingError, ValidationError
from catising.experiment import FORMATS, ExperimentSpec, Kind, load_spec, validate_parameters
from catising.logger import Logger, format_value, install_message_handler
from catising.runner import Runner


COMMANDS = ("run", "sweep", "oracle-check", "version")


class Application(QCoreApplication):
    def __init__(self, sys_argv):
        super(Application, self).__init__(sys_argv)
        self.setApplicationName("catising")
        self.setApplicationVersion(__version__)
        self._runner = Runner()
        self._logger = Logger()
        self._runner.status_update.connect(self.show_status)
        self._logger.status_update.connect(self.show_status)

        self._parser = QCommandLineParser()
        self._parser.setApplicationDescription(
            "Dissipative cat-qubit and Ising memory experiments."
        )
        self._help = self._parser.addHelpOption()
        self._parser.addPositionalArgument("command", " | ".join(COMMANDS))
        self._parser.addPositionalArgument("spec-file", "YAML experiment document", "[spec-file]")
        self._seed = QCommandLineOption(["seed"], "Master seed (overrides the document).", "u64")
        self._workers = QCommandLineOption(["workers"], "Worker threads.", "n")
        self._out = QCommandLineOption(["out"], "Output file.", "path")
        self._format = QCommandLineOption(["format"], "csv or json.", "format")
        self._axis = QCommandLineOption(["axis"], "Sweep parameter.", "key")
        self._values = QCommandLineOption(["values"], "Comma-separated sweep values.", "list")
        self._verbose = QCommandLineOption(["verbose"], "Print debug diagnostics.")
        for option in (self._seed, self._workers, self._out, self._format, self._axis, self._values, self._verbose):
            self._parser.addOption(option)

    def show_status(self, status: str):
        print(status, file=sys.stderr)

    def execute(self) -> int:
        if not self._parser.parse(self.arguments()):
            print(self._parser.errorText(), file=sys.stderr)
            return 2
        if self._parser.isSet(self._help):
            print(self._parser.helpText())
            return 0
        install_message_handler(self._parser.isSet(self._verbose))

        arguments = self._parser.positionalArguments()
        command = arguments[0] if arguments else ""
        if command not in COMMANDS:
            print(f"Unknown command '{command}', expected one of {', '.join(COMMANDS)}.", file=sys.stderr)
            return 2
        try:
            return self._dispatch(command, arguments[1:])
        except CatIsingError as error:
            print(f"{type(error).__name__}: {error}", file=sys.stderr)
            return error.exit_code
        except Exception as error:
            print(f"{type(error).__name__}: {error}", file=sys.stderr)
            return 1

    def _dispatch(self, command: str, arguments: list[str]) -> int:
        if command == "version":
            print(__version__)
            return 0
        if command == "oracle-check":
            spec = self._overrides(
                ExperimentSpec(Kind.ORACLE_CHECK, validate_parameters(Kind.ORACLE_CHECK, {}))
            )
            record = self._runner.run(spec)
            print(",".join(record.columns))
            for row in record.rows:
                print(",".join(format_value(value) for value in row))
            if self._parser.isSet(self._out):
                self._logger.save(record)
            return 0 if all(row[-1] for row in record.rows) else 3

        if not arguments:
            raise ValidationError([f"'{command}' needs a spec file"])
        spec = self._overrides(load_spec(arguments[0]))
        if command == "run":
            record = self._runner.run(spec)
        else:
            if not self._parser.isSet(self._axis):
                raise ValidationError(["sweep needs --axis"])
            record = self._runner.sweep(spec, self._parser.value(self._axis), self._sweep_values())
        self._logger.save(record)
        return 0

    def _sweep_values(self) -> list[float]:
        text = self._parser.value(self._values)
        values = []
        for item in filter(None, (part.strip() for part in text.split(","))):
            try:
                values.append(float(item))
            except ValueError:
                raise ValidationError([f"sweep value {item!r} is not a number"]) from None
        return values

    def _overrides(self, spec: ExperimentSpec) -> ExperimentSpec:
        problems = []
        changes: dict = {}
        if self._parser.isSet(self._seed):
            try:
                seed = int(self._parser.value(self._seed))
                if not 0 <= seed < 2**64:
                    raise ValueError
                changes["seed"] = seed
            except ValueError:
                problems.append(f"--seed must be an integer in [0, 2^64), got {self._parser.value(self._seed)}")
        if self._parser.isSet(self._workers):
            try:
                workers = int(self._parser.value(self._workers))
                if workers < 1:
                    raise ValueError
                changes["workers"] = workers
            except ValueError:
                problems.append(f"--workers must be a positive integer, got {self._parser.value(self._workers)}")
        if self._parser.isSet(self._format):
            fmt = self._parser.value(self._format)
            if fmt not in FORMATS:
                problems.append(f"--format must be one of {list(FORMATS)}, got {fmt}")
            changes["format"] = fmt
        if self._parser.isSet(self._out):
            changes["output"] = Path(self._parser.value(self._out))
        if problems:
            raise ValidationError(problems)
        return replace(spec, **changes)


def main():
    app = Application(sys.argv)
    sys.exit(app.execute())


if __name__ == "__main__":
    main()
