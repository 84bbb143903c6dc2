"""
Config plumbing around draccus.

Config files are YAML documents mapped onto dataclasses. Before draccus sees a document, every key is checked
against the dataclass fields so that typos fail with the offending key and its line. Command-line arguments
(`--env.n 8`, `--override run.seeds=1,2`) are merged into the document, values containing commas become lists, and a
top-level `metadata` key is dropped so that a run's metadata sidecar can be fed back in as a config.
"""
import atexit
import dataclasses
import functools
import inspect
import os
import sys
import tempfile
import typing
import urllib.parse
from functools import wraps
from typing import Any, Dict, List, Optional, Tuple

import draccus
import fsspec
import yaml
from fsspec import AbstractFileSystem


DEFAULT_CONFIG_DIR = os.path.join(os.path.dirname(__file__), "config")
# presets of a source checkout, when the package is not installed
_SOURCE_CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "config")
# keys of this name at the top level are written by the metadata sidecar and ignored on load
METADATA_KEY = "metadata"


class ConfigError(ValueError):
    """A malformed config file or command line."""


def main(
    fn=None,
    *,
    args: Optional[List[str]] = None,
    config_dir: Optional[str] = DEFAULT_CONFIG_DIR,
    aliases: Optional[Dict[str, str]] = None,
):
    """
    Like draccus.wrap but can handle config paths that are urls loadable by fsspec, validates keys strictly and
    accepts `--override KEY=VALUE`. Only the first arg of `fn` can be config-ified.

    :param args: the args to parse. If None, will use sys.argv[1:]
    :param config_dir: the directory to look for configs in (if the path does not exist already). If None, will only
        use the current working directory
    :param aliases: short flags mapped to dotted config keys, e.g. {"out": "output.dir"}
    """

    if fn is None:
        return functools.partial(main, args=args, config_dir=config_dir, aliases=aliases)

    _cmdline_args = args

    @wraps(fn)
    def wrapper_inner(*args, **kwargs):
        cmdline_args = _cmdline_args if _cmdline_args is not None else sys.argv[1:]
        argspec = inspect.getfullargspec(fn)
        argtype = argspec.annotations[argspec.args[0]]
        cfg = parse_config(argtype, cmdline_args, config_dir=config_dir, aliases=aliases)
        return fn(cfg, *args, **kwargs)

    return wrapper_inner


def parse_config(
    config_class,
    cmdline_args: List[str],
    *,
    config_dir: Optional[str] = DEFAULT_CONFIG_DIR,
    aliases: Optional[Dict[str, str]] = None,
):
    config_path, cmdline_args = _maybe_get_config_path_and_cmdline_args(cmdline_args)
    config_path = _resolve_config_path(config_path, config_dir)

    document: Dict[str, Any] = {}
    if config_path is not None:
        with open(config_path) as f:
            text = f.read()
        validate_yaml_keys(config_class, text, source=config_path)
        document = yaml.safe_load(text) or {}
        document.pop(METADATA_KEY, None)

    for key, raw in _parse_cmdline_overrides(cmdline_args, aliases or {}):
        field_type = resolve_field_type(config_class, key)
        _set_dotted(document, key, _parse_override_value(raw, field_type))

    with tempfile.NamedTemporaryFile("w", prefix="config", suffix=".yaml", delete=False) as f:
        yaml.safe_dump(document, f)
        merged_path = f.name
    try:
        return draccus.parse(config_class=config_class, config_path=merged_path, args=[])
    except Exception as e:
        raise ConfigError(f"invalid config: {e}") from e
    finally:
        os.unlink(merged_path)


def _resolve_config_path(config_path: Optional[str], config_dir: Optional[str]) -> Optional[str]:
    if config_path is None:
        return None
    paths_to_check = [config_path, f"{config_path}.yaml", f"{config_path}.yml"]
    if config_dir is not None:
        search_dirs = [config_dir]
        if config_dir == DEFAULT_CONFIG_DIR:
            search_dirs.append(_SOURCE_CONFIG_DIR)
        paths_to_check.extend([os.path.join(d, p) for d in search_dirs for p in paths_to_check])

    for path in paths_to_check:
        if os.path.exists(path):
            return path
    raise ConfigError(f"config file {config_path} not found")


def _maybe_get_config_path_and_cmdline_args(args: List[str]):
    """
    We want to accept ... --config_path <config> ... where config could be a path or url.
    If URL, we need to download it and save it to a temp file. We then want to remove --config_path
    from the cmdline args and return it separately here along with the modified cmdline args.
    """
    if "--config_path" not in args and "--config" not in args:
        return None, args
    else:
        try:
            config_path_index = args.index("--config_path")
        except ValueError:
            config_path_index = args.index("--config")

        if config_path_index + 1 >= len(args):
            raise ConfigError("--config needs a path")
        config_path = args[config_path_index + 1]

        if urllib.parse.urlparse(config_path).scheme:
            fs: AbstractFileSystem
            fs, fs_path = fsspec.core.url_to_fs(config_path)
            temp_file = tempfile.NamedTemporaryFile(prefix="config", suffix=".yaml", delete=False)
            atexit.register(lambda: os.unlink(temp_file.name))
            fs.get(fs_path, temp_file.name)
            config_path = temp_file.name

        args = args.copy()
        del args[config_path_index]
        del args[config_path_index]
        return config_path, args


def _parse_cmdline_overrides(args: List[str], aliases: Dict[str, str]) -> List[Tuple[str, str]]:
    """`--override k=v`, `--k v` and `--k=v` all become (k, v), in order."""
    pairs = []
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}")
        flag = arg[2:]
        if "=" in flag:
            flag, value = flag.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(args):
                raise ConfigError(f"--{flag} needs a value")
            value = args[i + 1]
            i += 2

        if flag == "override":
            if "=" not in value:
                raise ConfigError(f"--override expects KEY=VALUE, got {value!r}")
            flag, value = value.split("=", 1)
        pairs.append((aliases.get(flag, flag), value))
    return pairs


def _parse_override_value(raw: str, field_type) -> Any:
    if "," in raw and not raw.lstrip().startswith(("[", "{")):
        value = yaml.safe_load(f"[{raw}]")
    else:
        value = yaml.safe_load(raw)
    if _is_list_type(field_type) and not isinstance(value, list):
        value = [value]
    return value


def _set_dotted(document: Dict[str, Any], key: str, value: Any):
    *parents, leaf = key.split(".")
    node = document
    for p in parents:
        child = node.get(p)
        if not isinstance(child, dict):
            child = {}
            node[p] = child
        node = child
    node[leaf] = value


def _is_list_type(tp) -> bool:
    return typing.get_origin(tp) in (list, List, tuple)


def _dataclass_of(tp):
    """The dataclass type inside `tp` (unwrapping Optional), or None."""
    if dataclasses.is_dataclass(tp):
        return tp
    if typing.get_origin(tp) is typing.Union:
        for arg in typing.get_args(tp):
            if dataclasses.is_dataclass(arg):
                return arg
    return None


def _field_types(cls) -> Dict[str, Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints.get(f.name, Any) for f in dataclasses.fields(cls)}


def resolve_field_type(config_class, dotted_key: str):
    """The annotated type of `dotted_key` in `config_class`; raises ConfigError naming the key if it doesn't exist."""
    cls = config_class
    tp: Any = config_class
    parts = dotted_key.split(".")
    for depth, part in enumerate(parts):
        cls = _dataclass_of(tp)
        if cls is None or part not in _field_types(cls):
            raise ConfigError(f"unknown config key {'.'.join(parts[:depth + 1])!r}")
        tp = _field_types(cls)[part]
    return tp


def validate_yaml_keys(config_class, text: str, source: str = "<config>"):
    """
    Rejects keys that don't correspond to a field of `config_class` (recursively), reporting the dotted key and its
    line. A top-level `metadata` key is allowed and ignored.
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{source}: malformed YAML: {e}") from e

    if root is None:
        return
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{source}:{root.start_mark.line + 1}: expected a mapping at the top level")

    def walk(node: yaml.MappingNode, cls, prefix: str):
        fields = _field_types(cls)
        for key_node, value_node in node.value:
            key = key_node.value
            dotted = f"{prefix}{key}"
            if not prefix and key == METADATA_KEY:
                continue
            if key not in fields:
                raise ConfigError(f"{source}:{key_node.start_mark.line + 1}: unknown config key {dotted!r}")
            nested = _dataclass_of(fields[key])
            if nested is not None and isinstance(value_node, yaml.MappingNode):
                walk(value_node, nested, f"{dotted}.")

    walk(root, config_class, "")
