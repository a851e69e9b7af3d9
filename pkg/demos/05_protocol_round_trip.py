"""
One request, one response
=========================

The client sends one message and gets one back. With a randomizer
session the online request carries masked plaintext instead of
ciphertexts; the masks were encrypted ahead of time.
"""
import random
import tempfile

from pdte import (BINARY, INTEGER, Client, FileChannel, HeParams, LoopbackChannel, Server, classify_plain,
                  client_round_trip, complete_tree, keygen, randomizer_provision)
from pdte.cost import CostReport
from pdte.protocol import ClassifyResponse

rng = random.Random(2)
tree = complete_tree(4, 8, 3, seed=2)
x = [rng.randrange(256) for _ in range(3)]

for scheme, mode, packing in (("bin", BINARY, "label"), ("int", INTEGER, "output")):
    kt = keygen(HeParams(mode, slots=16, levels=24, seed=2))
    server = Server(tree, kt.pk, kt.ek)
    client = Client(kt, 3, 8, tree.params.k, packing)
    channel = LoopbackChannel(server)
    label = client_round_trip(client, channel, x)
    req, resp = (len(m) for _, m in channel.messages)
    print(f"{scheme}: label={label} expected={classify_plain(tree, x)} messages={channel.message_count} "
          f"request={req}B response={resp}B")
    print(CostReport.from_text(ClassifyResponse.from_bytes(channel.messages[1][1]).report))

# blinded upload through files
kt = keygen(HeParams(BINARY, slots=1, levels=24, seed=4))
session = randomizer_provision(kt.pk, 100, "bin", rng)
server = Server(tree, kt.pk, kt.ek)
server.register(session.server)
client = Client(kt, 3, 8, tree.params.k, masks=session.client)
with tempfile.TemporaryDirectory() as d:
    print("blinded:", client_round_trip(client, FileChannel(server, d), x))
