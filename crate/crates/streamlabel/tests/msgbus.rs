mod common;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use streamlabel::msgbus::{BusError, RegistryClient, RegistryServer, TcpBus, Transport};
use streamlabel_core::{encode_message, FrameMessage, TopicName};

use common::{eventually, Bus};

const WAIT: Duration = Duration::from_secs(5);

fn topic(name: &str) -> TopicName {
    TopicName::new(name).unwrap()
}

fn msg(id: i32) -> FrameMessage {
    FrameMessage {
        frame_id: id,
        width: 2,
        height: 1,
        pixels: vec![id, -id],
    }
}

#[test]
fn subscriber_in_advance_sees_every_message_in_order() {
    for (name, bus) in Bus::both() {
        let t = topic("data_input");
        let publisher = bus.transport.advertise(&t).unwrap();
        let sub = bus.transport.subscribe(&t, 128).unwrap();
        for i in 0..100 {
            assert_eq!(publisher.publish(&msg(i)).unwrap(), 1, "{name}");
        }
        for i in 0..100 {
            assert_eq!(sub.take(WAIT).unwrap(), Some(msg(i)), "{name}");
        }
        assert_eq!(sub.dropped(), 0);
    }
}

#[test]
fn late_subscriber_misses_earlier_messages() {
    for (name, bus) in Bus::both() {
        let t = topic("late");
        let publisher = bus.transport.advertise(&t).unwrap();
        assert_eq!(publisher.publish(&msg(1)).unwrap(), 0, "{name}");
        let sub = bus.transport.subscribe(&t, 4).unwrap();
        assert_eq!(sub.take(Duration::from_millis(200)).unwrap(), None, "{name}");
        publisher.publish(&msg(2)).unwrap();
        assert_eq!(sub.take(WAIT).unwrap(), Some(msg(2)), "{name}");
    }
}

#[test]
fn full_queue_drops_the_oldest() {
    for (name, bus) in Bus::both() {
        let t = topic("small");
        let publisher = bus.transport.advertise(&t).unwrap();
        let sub = bus.transport.subscribe(&t, 2).unwrap();
        for i in 1..=3 {
            publisher.publish(&msg(i)).unwrap();
        }
        assert!(eventually(WAIT, || sub.dropped() == 1), "{name}");
        assert_eq!(sub.take(WAIT).unwrap(), Some(msg(2)), "{name}");
        assert_eq!(sub.take(WAIT).unwrap(), Some(msg(3)), "{name}");
        assert_eq!(sub.take(Duration::ZERO).unwrap(), None, "{name}");
        assert_eq!(sub.dropped(), 1);
    }
}

#[test]
fn fan_out_delivers_identical_bytes() {
    for (name, bus) in Bus::both() {
        let t = topic("fan");
        let publisher = bus.transport.advertise(&t).unwrap();
        let subs: Vec<_> = (0..3).map(|_| bus.transport.subscribe(&t, 4).unwrap()).collect();
        assert_eq!(publisher.publish(&msg(7)).unwrap(), 3, "{name}");
        let expected = encode_message(&msg(7)).unwrap();
        for s in &subs {
            assert_eq!(&*s.take_raw(WAIT).unwrap(), &expected[..], "{name}");
        }
    }
}

#[test]
fn no_subscribers_is_not_an_error() {
    for (name, bus) in Bus::both() {
        let publisher = bus.transport.advertise(&topic("nobody")).unwrap();
        assert_eq!(publisher.publish(&msg(0)).unwrap(), 0, "{name}");
    }
}

#[test]
fn take_on_empty_queue_times_out() {
    for (_, bus) in Bus::both() {
        let sub = bus.transport.subscribe(&topic("quiet"), 1).unwrap();
        assert_eq!(sub.take(Duration::ZERO).unwrap(), None);
        assert!(sub.is_empty());
    }
}

#[test]
fn invalid_names_and_capacity_are_rejected() {
    assert!(TopicName::new("Data Input").is_err());
    assert!(TopicName::new("/data").is_err());
    for (_, bus) in Bus::both() {
        assert!(matches!(
            bus.transport.subscribe(&topic("x"), 0),
            Err(BusError::ZeroCapacity)
        ));
    }
}

#[test]
fn encode_failure_propagates() {
    let bus = Bus::in_process();
    let publisher = bus.transport.advertise(&topic("bad")).unwrap();
    let bad = FrameMessage {
        frame_id: 0,
        width: 2,
        height: 2,
        pixels: vec![0; 3],
    };
    assert!(matches!(publisher.publish(&bad), Err(BusError::Codec(_))));
}

#[test]
fn concurrent_publishers_never_duplicate() {
    for (name, bus) in Bus::both() {
        let t = topic("stress");
        let handles: Vec<_> = (0..4).map(|_| bus.transport.advertise(&t).unwrap()).collect();
        let sub = Arc::new(bus.transport.subscribe(&t, 4096).unwrap());
        let publishers: Vec<_> = handles
            .into_iter()
            .zip(0..)
            .map(|(handle, p)| {
                std::thread::spawn(move || {
                    for i in 0..250 {
                        handle.publish(&msg(p * 1000 + i)).unwrap();
                    }
                })
            })
            .collect();
        let consumers: Vec<_> = (0..2)
            .map(|_| {
                let sub = sub.clone();
                std::thread::spawn(move || {
                    let mut seen = Vec::new();
                    while let Some(m) = sub.take(Duration::from_millis(500)).unwrap() {
                        seen.push(m.frame_id);
                    }
                    seen
                })
            })
            .collect();
        for p in publishers {
            p.join().unwrap();
        }
        let mut all = HashSet::new();
        let mut count = 0;
        for c in consumers {
            for id in c.join().unwrap() {
                assert!(all.insert(id), "{name}: {id} seen twice");
                count += 1;
            }
        }
        assert_eq!(count, 1000, "{name}");
    }
}

#[test]
fn per_publisher_order_holds_with_two_publishers() {
    for (name, bus) in Bus::both() {
        let a = topic("ord_a");
        let sub = bus.transport.subscribe(&a, 1024).unwrap();
        let pa = bus.transport.advertise(&a).unwrap();
        // A second TCP bus gives a second, independent endpoint on the topic.
        let other = match &bus.registry {
            Some(r) => Arc::new(TcpBus::new(RegistryClient::new(r.local_addr().to_string()))) as Arc<dyn Transport>,
            None => bus.transport.clone(),
        };
        let pb = other.advertise(&a).unwrap();
        let late = bus.transport.subscribe(&a, 1024).unwrap();
        for i in 0..50 {
            pa.publish(&msg(i)).unwrap();
            pb.publish(&msg(1000 + i)).unwrap();
        }
        let mut last = (-1, 999);
        let mut n = 0;
        while let Some(m) = late.take(Duration::from_millis(300)).unwrap() {
            let slot = if m.frame_id < 1000 { &mut last.0 } else { &mut last.1 };
            assert!(m.frame_id > *slot, "{name}: out of order");
            *slot = m.frame_id;
            n += 1;
        }
        assert_eq!(n, 100, "{name}");
        drop(sub);
    }
}

#[test]
fn transports_carry_identical_bytes() {
    let seq: Vec<FrameMessage> = (0..20)
        .map(|i| FrameMessage {
            frame_id: i - 10,
            width: (i % 5 + 1) as u16,
            height: 3,
            pixels: (0..(i % 5 + 1) * 3).map(|p| p * 0x0101_0101 - i).collect(),
        })
        .collect();
    let mut received = Vec::new();
    for (_, bus) in Bus::both() {
        let t = topic("data_output");
        let publisher = bus.transport.advertise(&t).unwrap();
        let sub = bus.transport.subscribe(&t, 64).unwrap();
        for m in &seq {
            publisher.publish(m).unwrap();
        }
        let bytes: Vec<Vec<u8>> = (0..seq.len()).map(|_| sub.take_raw(WAIT).unwrap().to_vec()).collect();
        received.push(bytes);
    }
    assert_eq!(received[0], received[1]);
    assert_eq!(received[0][3], encode_message(&seq[3]).unwrap());
}

#[test]
fn tcp_subscriber_discovers_a_later_publisher() {
    let bus = Bus::tcp();
    let t = topic("later");
    let sub = bus.transport.subscribe(&t, 8).unwrap();
    let publisher = bus.transport.advertise(&t).unwrap();
    assert!(eventually(WAIT, || publisher.publish(&msg(1)).unwrap() == 1));
    assert_eq!(sub.take(WAIT).unwrap().map(|m| m.frame_id), Some(1));
}

#[test]
fn tcp_peer_loss_leaves_others_unaffected() {
    let bus = Bus::tcp();
    let t = topic("loss");
    let publisher = bus.transport.advertise(&t).unwrap();
    let keep = bus.transport.subscribe(&t, 16).unwrap();
    let gone = bus.transport.subscribe(&t, 16).unwrap();
    assert_eq!(publisher.publish(&msg(1)).unwrap(), 2);
    drop(gone);
    assert!(eventually(WAIT, || publisher.publish(&msg(2)).unwrap() == 1));
    assert_eq!(keep.take(WAIT).unwrap(), Some(msg(1)));
    assert!(eventually(WAIT, || keep.take(Duration::ZERO).unwrap() == Some(msg(2))));
}

#[test]
fn advertise_is_idempotent_in_the_registry() {
    let bus = Bus::tcp();
    let t = topic("data_input");
    let a = bus.transport.advertise(&t).unwrap();
    let _b = bus.transport.advertise(&t).unwrap();
    let client = RegistryClient::new(bus.registry_addr());
    assert_eq!(client.lookup(&t).unwrap().len(), 1);
    assert_eq!(client.list().unwrap(), vec!["data_input".to_string()]);
    drop(a);
}

#[test]
fn tcp_endpoint_unregisters_on_drop() {
    let bus = Bus::tcp();
    let client = RegistryClient::new(bus.registry_addr());
    {
        let other = TcpBus::new(client.clone());
        other.advertise(&topic("temp")).unwrap();
        assert_eq!(client.lookup(&topic("temp")).unwrap().len(), 1);
    }
    assert!(client.lookup(&topic("temp")).unwrap().is_empty());
}

#[test]
fn unreachable_registry_is_a_connection_error() {
    // Bind then drop to get a port with nothing listening.
    let addr = {
        let r = RegistryServer::bind("127.0.0.1:0").unwrap();
        r.local_addr().to_string()
    };
    let bus = TcpBus::new(RegistryClient::new(addr));
    assert!(matches!(
        bus.advertise(&topic("x")),
        Err(BusError::RegistryUnreachable { .. })
    ));
    assert!(matches!(
        bus.subscribe(&topic("x"), 1),
        Err(BusError::RegistryUnreachable { .. })
    ));
}

#[test]
fn registry_speaks_the_line_protocol_over_tcp() {
    let server = RegistryServer::bind("127.0.0.1:0").unwrap();
    let mut stream = TcpStream::connect(server.local_addr()).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut ask = |line: &str| {
        writeln!(stream, "{line}").unwrap();
        let mut reply = String::new();
        reader.read_line(&mut reply).unwrap();
        reply
    };
    assert_eq!(ask("REGISTER data_input 127.0.0.1:7001"), "OK\n");
    assert_eq!(ask("LOOKUP data_input"), "OK 1 127.0.0.1:7001\n");
    assert_eq!(ask("LOOKUP unknown_topic"), "OK 0\n");
    assert!(ask("FROB").starts_with("ERR "));
    assert_eq!(ask("UNREGISTER data_input 127.0.0.1:7001"), "OK\n");
    assert_eq!(ask("LOOKUP data_input"), "OK 0\n");
}
