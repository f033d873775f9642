from .handlers import Command, CommandHandlers, Verb, load_model
from .reproduce_handler import ReproduceHandler

__all__ = ["Command", "CommandHandlers", "ReproduceHandler", "Verb", "load_model"]
