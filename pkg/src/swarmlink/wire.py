"""Wire discriminator bytes shared by every serialized message.

The first byte of any transmission identifies it: telemetry packets start
with the packet version byte, control messages with their message type.
All multi-byte integers on the wire are big-endian.
"""

PACKET_VERSION = 0x01

MSG_KEY_OFFER = 0x02
MSG_KEY_RESPONSE = 0x03
MSG_REKEY = 0x04
MSG_REKEY_ACK = 0x05

NODE_ID_MAX = 0xFFFF
