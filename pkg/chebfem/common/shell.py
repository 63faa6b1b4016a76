import asyncio
import inspect
import shlex
import signal
import sys
import traceback
from typing import Any, Dict, List, Tuple

from prompt_toolkit import PromptSession
from prompt_toolkit.completion import NestedCompleter, WordCompleter
from prompt_toolkit.key_binding import KeyBindings
from prompt_toolkit.patch_stdout import patch_stdout

from chebfem.common.exceptions import UsageError


class ExitPromptException(Exception):
    pass


class CommandShell:
    """
    Command dispatcher for the solver client.

    Subclasses implement do_<action> coroutines returning (result, err).
    Commands run either one by one from a batch (run_command) or from an
    interactive prompt-toolkit session (run). Hyphenated command names
    such as mesh-gen resolve through the aliases table.
    """
    ATTR_START = 'do_'
    prompt = 'chebfem> '
    doc_header = 'Commands:'

    def __init__(self, ignore_sigint: bool = True):
        self._ignore_sigint = ignore_sigint
        self.aliases: Dict[str, str] = {'?': 'help', 'exit': 'quit'}
        self.prompt_session = None
        self._currently_running_task = None

    @property
    def command_list(self) -> List[str]:
        return [attr[len(self.ATTR_START):] for attr in dir(self) if attr.startswith(self.ATTR_START)] + list(self.aliases.keys())

    def _get_command(self, command: str):
        command = self.aliases.get(command, command)
        func = getattr(self, self.ATTR_START + command, None)
        if func is None:
            raise UsageError('unknown command %r' % command)
        return func

    def _get_command_args(self, command: str):
        params = inspect.signature(self._get_command(command)).parameters.values()
        args = [p for p in params if p.default == p.empty]
        kwargs = [p for p in params if p.default != p.empty]
        return args, kwargs

    def _get_command_usage(self, command: str) -> str:
        args, kwargs = self._get_command_args(command)
        return ('%s %s %s' % (command, ' '.join('<%s>' % a.name for a in args), ' '.join('[%s]' % k.name for k in kwargs))).strip()

    async def run_command(self, command: str, args: List[str]) -> Tuple[Any, Exception]:
        try:
            args_required, args_optional = self._get_command_args(command)
        except UsageError as e:
            return None, e
        if len(args) < len(args_required) or len(args) > len(args_required) + len(args_optional):
            return None, UsageError('bad arguments, usage: %s' % self._get_command_usage(command))
        try:
            func = self._get_command(command)
            if asyncio.iscoroutinefunction(func):
                return await func(*args)
            return func(*args)
        except (ExitPromptException, asyncio.CancelledError):
            raise
        except Exception as e:
            traceback.print_exc()
            return None, e

    async def run(self):
        if self._ignore_sigint and sys.platform != 'win32':
            asyncio.get_running_loop().add_signal_handler(signal.SIGINT, self._sigint_handler)
        try:
            await self._run_prompt_forever()
        finally:
            if self._ignore_sigint and sys.platform != 'win32':
                asyncio.get_running_loop().remove_signal_handler(signal.SIGINT)

    async def _run_prompt_forever(self):
        bindings = KeyBindings()
        bindings.add('c-c')(self._interrupt_handler)
        self.prompt_session = PromptSession(enable_history_search=True, key_bindings=bindings)
        completer = NestedCompleter({com: WordCompleter([]) for com in self.command_list})
        with patch_stdout():
            while True:
                try:
                    line = await self.prompt_session.prompt_async(self.prompt, completer=completer)
                except EOFError:
                    return
                if not line.strip():
                    continue
                args = shlex.split(line)
                try:
                    self._currently_running_task = asyncio.ensure_future(self.run_command(args[0], args[1:]))
                    _, err = await self._currently_running_task
                except asyncio.CancelledError:
                    print()
                    continue
                except ExitPromptException:
                    return
                finally:
                    self._currently_running_task = None
                if err is not None:
                    print('Command failed: %s' % err)

    def _sigint_handler(self):
        # blocking work already handed to a worker thread still runs to completion
        if self._currently_running_task is not None:
            self._currently_running_task.cancel()

    def _interrupt_handler(self, event):
        event.app.current_buffer.text = ''

    def do_help(self):
        """List the available commands"""
        print(self.doc_header)
        print('=' * len(self.doc_header))
        usages = {command: self._get_command_usage(command) for command in self.command_list}
        width = max(len(u) for u in usages.values())
        for command in sorted(usages):
            doc = (self._get_command(command).__doc__ or '').strip().split('\n')[0]
            print(('%-' + str(width + 2) + 's%s') % (usages[command], doc))
        return True, None

    def do_quit(self):
        """Exit the prompt"""
        raise ExitPromptException()
