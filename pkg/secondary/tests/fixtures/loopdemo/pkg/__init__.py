from pkg.core import Engine, LIMIT
