"""Scenario files: YAML parsing, schema validation and line-anchored errors."""
from pathlib import Path

import yaml
from yaml.nodes import MappingNode, SequenceNode

from frontflow.serializers.scenario import ScenarioSerializer
from frontflow.solvers.exceptions import ScenarioConfigError


def _first_error(errors, path=()):
    """Walk DRF's nested error structure down to the first message and its key path."""
    if isinstance(errors, dict):
        key = next(iter(errors))
        nested = errors[key]
        if key == 'non_field_errors':
            return path, _first_error(nested)[1]
        return _first_error(nested, path + (key,))
    if isinstance(errors, list) and errors:
        if isinstance(errors[0], (dict, list)):
            return _first_error(errors[0], path)
        return path, str(errors[0])
    return path, str(errors)


def _locate(node, path) -> int | None:
    """1-based line of the deepest node along `path` that exists in the document."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in path:
        child = None
        if isinstance(node, MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    child = value_node
                    line = key_node.start_mark.line + 1
                    break
        elif isinstance(node, SequenceNode):
            index = int(key) if str(key).isdigit() else -1
            if 0 <= index < len(node.value):
                child = node.value[index]
                line = child.start_mark.line + 1
        if child is None:
            break
        node = child
    return line


def parse_scenario(text: str) -> dict:
    """Validate scenario text and return the validated data with every block filled."""
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, 'problem_mark', None)
        raise ScenarioConfigError(f"Invalid YAML: {getattr(exc, 'problem', exc)}",
                                  line=mark.line + 1 if mark else None)

    if not isinstance(data, dict):
        raise ScenarioConfigError("A scenario file must be a mapping of blocks", line=1)

    serializer = ScenarioSerializer(data=data)
    if not serializer.is_valid():
        path, message = _first_error(serializer.errors)
        where = '.'.join(str(p) for p in path) or 'scenario'
        raise ScenarioConfigError(f"{where}: {message}", line=_locate(root, path))
    return serializer.validated_data


def load_scenario(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioConfigError(f"Cannot read scenario file {path}: {exc.strerror}")
    return parse_scenario(text)
