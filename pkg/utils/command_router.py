from typing import Callable, Dict, List, Optional

from models.schemas import CommandName, RunReport


class Route:
    def __init__(self, name: CommandName, handler: Callable[..., RunReport], help: Optional[str] = None):
        self.name = name
        self.handler = handler
        self.help = help or (handler.__doc__ or "").strip().splitlines()[0]


class CommandRouter:
    """Collects command handlers, the CLI counterpart of a web framework's APIRouter"""

    def __init__(self):
        self.routes: List[Route] = []

    def command(self, name: CommandName, help: Optional[str] = None):
        def decorator(handler: Callable[..., RunReport]) -> Callable[..., RunReport]:
            self.routes.append(Route(name, handler, help))
            return handler

        return decorator


class CommandApp:
    """Registry of every command, filled by include_router"""

    def __init__(self, title: str, description: str, version: str):
        self.title = title
        self.description = description
        self.version = version
        self.routes: Dict[str, Route] = {}

    def include_router(self, router: CommandRouter):
        for route in router.routes:
            self.routes[route.name.value] = route

    def get(self, name: str) -> Route:
        return self.routes[name]
