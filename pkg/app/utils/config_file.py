"""
算例配置文件

配置文件与 .env 同格式（UTF-8，每行 key=value，# 开头为注释），用 python-dotenv 解析。
扫描文件每个非注释行是一个算例，由空白分隔的 key=value 组成，叠加在基础配置之上。
"""

import os
import shlex
from typing import Dict, List, Optional

from dotenv import dotenv_values

from ..core.errors import ConfigurationError


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    读取 key=value 配置文件

    Args:
        path: 文件路径，None 时返回空字典

    Returns:
        Dict[str, str]: 原始字符串值
    """
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise ConfigurationError(f"Config file not found: {path}")
    values = dotenv_values(path, encoding="utf-8", interpolate=False)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigurationError(f"Config keys without a value in {path}: {missing}")
    return dict(values)


def parse_sweep_line(line: str) -> Dict[str, str]:
    """解析扫描文件的一行"""
    options = {}
    for token in shlex.split(line, comments=True):
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"Expected key=value, got '{token}'")
        options[key.strip()] = value.strip()
    return options


def load_sweep_file(path: str) -> List[Dict[str, str]]:
    """
    读取扫描文件

    Args:
        path: 文件路径

    Returns:
        List[Dict[str, str]]: 每个算例的覆盖项，按文件顺序
    """
    if not os.path.isfile(path):
        raise ConfigurationError(f"Sweep file not found: {path}")
    cases = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            options = parse_sweep_line(line)
            if options:
                cases.append(options)
    return cases
